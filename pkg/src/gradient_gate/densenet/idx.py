"""IDX (MNIST) file reading and writing."""

from __future__ import annotations

import gzip
import logging
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from ..errors import BadMagicError, CountMismatchError, TruncatedFileError

logger = logging.getLogger(__name__)

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


class Dataset(BaseModel):
    """Grayscale images in [0, 1] with integer labels 0-9."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    images: np.ndarray
    labels: np.ndarray

    @model_validator(mode="after")
    def _check(self) -> Dataset:
        if self.images.ndim != 3:
            msg = f"images must have shape (N, rows, cols), got {self.images.shape}"
            raise ValueError(msg)
        if len(self.images) != len(self.labels):
            msg = f"{len(self.images)} images but {len(self.labels)} labels"
            raise ValueError(msg)
        if self.images.size and (self.images.min() < 0.0 or self.images.max() > 1.0):
            msg = "pixel values must lie in [0, 1]"
            raise ValueError(msg)
        return self

    def __len__(self) -> int:
        return len(self.labels)

    def head(self, n: int) -> Dataset:
        """The first ``n`` examples."""
        return Dataset(images=self.images[:n], labels=self.labels[:n])


def _open(path: Path) -> bytes:
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as handle:
            return handle.read()
    return path.read_bytes()


def read_idx(path: str | Path, magic: int) -> np.ndarray:
    """
    Parse one IDX file of unsigned bytes.

    Args:
        path: File path; ``.gz`` files are decompressed transparently.
        magic: Expected magic number.

    Raises:
        BadMagicError: If the magic number differs.
        TruncatedFileError: If the header or payload is incomplete.
    """
    path = Path(path)
    raw = _open(path)
    if len(raw) < 4:
        msg = f"{path}: truncated header ({len(raw)} bytes)"
        raise TruncatedFileError(msg)
    found = int(np.frombuffer(raw, dtype=">u4", count=1)[0])
    if found != magic:
        msg = f"{path}: bad magic 0x{found:08x}, expected 0x{magic:08x}"
        raise BadMagicError(msg)
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        msg = f"{path}: truncated header ({len(raw)} of {header} bytes)"
        raise TruncatedFileError(msg)
    dims = tuple(int(d) for d in np.frombuffer(raw, dtype=">u4", count=ndim, offset=4))
    size = int(np.prod(dims))
    if len(raw) < header + size:
        msg = f"{path}: truncated payload ({len(raw) - header} of {size} bytes)"
        raise TruncatedFileError(msg)
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=header).reshape(dims)


def load_idx(images_path: str | Path, labels_path: str | Path) -> Dataset:
    """
    Load an image file and its label file.

    Raises:
        BadMagicError: If either file has the wrong magic number.
        TruncatedFileError: If either file is incomplete.
        CountMismatchError: If the item counts differ.
    """
    images = read_idx(images_path, IMAGES_MAGIC)
    labels = read_idx(labels_path, LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        msg = f"{images_path} has {images.shape[0]} images but {labels_path} has {labels.shape[0]} labels"
        raise CountMismatchError(msg)
    logger.debug("loaded %d examples from %s", labels.shape[0], images_path)
    return Dataset(images=images.astype(np.float64) / 255.0, labels=labels.astype(np.int64))


def _find(data_dir: Path, stem: str) -> Path:
    for candidate in (data_dir / stem, data_dir / f"{stem}.gz"):
        if candidate.exists():
            return candidate
    msg = f"{data_dir}: neither {stem} nor {stem}.gz found"
    raise FileNotFoundError(msg)


def load_mnist(data_dir: str | Path, split: str = "train") -> Dataset:
    """Load the standard MNIST files (plain or gzipped) of ``split`` from ``data_dir``."""
    if split not in MNIST_FILES:
        msg = f"split must be one of {sorted(MNIST_FILES)}, got {split!r}"
        raise ValueError(msg)
    data_dir = Path(data_dir)
    images_stem, labels_stem = MNIST_FILES[split]
    return load_idx(_find(data_dir, images_stem), _find(data_dir, labels_stem))


def mnist_available(data_dir: str | Path) -> bool:
    try:
        for split in MNIST_FILES:
            for stem in MNIST_FILES[split]:
                _find(Path(data_dir), stem)
    except FileNotFoundError:
        return False
    return True


def write_idx(path: str | Path, array: np.ndarray) -> Path:
    """Write a uint8 array as an IDX file (gzipped when the name ends in ``.gz``)."""
    path = Path(path)
    array = np.ascontiguousarray(array, dtype=np.uint8)
    magic = 0x00000800 | array.ndim
    header = np.array([magic, *array.shape], dtype=">u4").tobytes()
    payload = header + array.tobytes()
    if path.suffix == ".gz":
        with gzip.open(path, "wb") as handle:
            handle.write(payload)
    else:
        path.write_bytes(payload)
    return path
