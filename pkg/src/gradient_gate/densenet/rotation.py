"""Counter-clockwise image rotation about the image centre.

Multiples of 90 degrees are exact index permutations; other angles use
bilinear interpolation with a zero background.
"""

from __future__ import annotations

import functools
from typing import NamedTuple

import numpy as np

ROTATIONS = (0, 45, 90, 135, 180)


class _Grid(NamedTuple):
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray


@functools.lru_cache(maxsize=32)
def _sampling_grid(height: int, width: int, degrees: float) -> _Grid:
    """Source pixel indices (into a 1-pixel zero-padded image) and bilinear weights."""
    theta = np.deg2rad(degrees)
    cy, cx = (height - 1) / 2.0, (width - 1) / 2.0
    r, c = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    x, y = c - cx, cy - r
    src_x = x * np.cos(theta) + y * np.sin(theta)
    src_y = -x * np.sin(theta) + y * np.cos(theta)
    src_r = cy - src_y
    src_c = src_x + cx
    r0 = np.floor(src_r)
    c0 = np.floor(src_c)
    dr = src_r - r0
    dc = src_c - c0
    rows = np.stack([r0, r0, r0 + 1, r0 + 1]).astype(np.int64)
    cols = np.stack([c0, c0 + 1, c0, c0 + 1]).astype(np.int64)
    weights = np.stack([(1 - dr) * (1 - dc), (1 - dr) * dc, dr * (1 - dc), dr * dc])
    # Shift into the padded frame; anything further out lands on the zero border.
    rows = np.clip(rows + 1, 0, height + 1)
    cols = np.clip(cols + 1, 0, width + 1)
    return _Grid(rows, cols, weights)


def rotate_batch(images: np.ndarray, degrees: float, chunk: int = 4096) -> np.ndarray:
    """
    Rotate a stack of images of shape ``(n, height, width)``.

    Args:
        images: Image stack.
        degrees: Counter-clockwise angle.
        chunk: Images interpolated per block, bounding temporary memory.

    Returns:
        New array of the same shape and dtype float64.
    """
    images = np.asarray(images, dtype=np.float64)
    turns, remainder = divmod(float(degrees), 90.0)
    if remainder == 0.0:
        return np.rot90(images, k=int(turns) % 4, axes=(1, 2)).copy()
    _, height, width = images.shape
    grid = _sampling_grid(height, width, float(degrees))
    out = np.empty_like(images)
    for start in range(0, len(images), chunk):
        padded = np.pad(images[start : start + chunk], ((0, 0), (1, 1), (1, 1)))
        samples = padded[:, grid.rows, grid.cols]
        out[start : start + chunk] = np.einsum("nkhw,khw->nhw", samples, grid.weights)
    return out


def rotate(image: np.ndarray, degrees: float) -> np.ndarray:
    """Single-image form of :func:`rotate_batch`."""
    return rotate_batch(np.asarray(image)[None], degrees)[0]
