"""Flat parameter and gradient container."""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from typing import Union

import numpy as np
from numpy.typing import ArrayLike

from ..errors import DimensionMismatchError, NonFiniteError, PartitionError

Partition = tuple[tuple[int, int], ...]


def _check_partition(partition: Iterable[Sequence[int]], size: int) -> Partition:
    ranges = tuple(sorted((int(start), int(stop)) for start, stop in partition))
    if not ranges:
        msg = "partition must contain at least one range"
        raise PartitionError(msg)
    cursor = 0
    for start, stop in ranges:
        if start != cursor or stop <= start:
            msg = f"partition ranges must be disjoint, non-empty and contiguous; got {list(ranges)}"
            raise PartitionError(msg)
        cursor = stop
    if cursor != size:
        msg = f"partition covers [0, {cursor}) but the vector has {size} values"
        raise PartitionError(msg)
    return ranges


class ParamVector:
    """Immutable float64 vector with an optional layer partition.

    The partition is a tuple of ``(start, stop)`` index ranges that are
    disjoint and cover ``[0, len)``; one range per layer.
    """

    __slots__ = ("_partition", "_values")

    def __init__(self, values: ArrayLike, partition: Iterable[Sequence[int]] | None = None):
        array = np.array(values, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(array)):
            msg = "ParamVector values must be finite"
            raise NonFiniteError(msg)
        array.setflags(write=False)
        self._values = array
        self._partition = None if partition is None else _check_partition(partition, array.size)

    @classmethod
    def from_parts(cls, parts: Sequence[ArrayLike]) -> ParamVector:
        """Concatenate per-layer arrays, recording one partition range per part."""
        arrays = [np.asarray(part, dtype=np.float64).reshape(-1) for part in parts]
        bounds = np.cumsum([0] + [a.size for a in arrays])
        partition = [(int(bounds[i]), int(bounds[i + 1])) for i in range(len(arrays))]
        return cls(np.concatenate(arrays) if arrays else np.zeros(0), partition)

    @property
    def values(self) -> np.ndarray:
        """Read-only view of the values."""
        return self._values

    @property
    def partition(self) -> Partition | None:
        return self._partition

    def layers(self) -> list[np.ndarray]:
        """Per-layer slices; the whole vector when no partition is set."""
        if self._partition is None:
            return [self._values]
        return [self._values[start:stop] for start, stop in self._partition]

    def split(self) -> list[ParamVector]:
        return [ParamVector(layer) for layer in self.layers()]

    def with_values(self, values: ArrayLike) -> ParamVector:
        """New vector with the same partition and different values."""
        return ParamVector(values, self._partition)

    def dot(self, other: VectorLike) -> float:
        other_values = as_array(other)
        if other_values.shape != self._values.shape:
            msg = f"dimension mismatch: {self._values.size} vs {other_values.size}"
            raise DimensionMismatchError(msg)
        return float(np.dot(self._values, other_values))

    def norm(self) -> float:
        return float(np.linalg.norm(self._values))

    def __len__(self) -> int:
        return int(self._values.size)

    def __neg__(self) -> ParamVector:
        return ParamVector(-self._values, self._partition)

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._values
        return self._values.astype(dtype)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ParamVector):
            return NotImplemented
        return self._partition == other._partition and np.array_equal(self._values, other._values)

    def __hash__(self) -> int:
        return hash((self._values.tobytes(), self._partition))

    def __repr__(self) -> str:
        preview = np.array2string(self._values, threshold=6, precision=4)
        layers = "" if self._partition is None else f", layers={len(self._partition)}"
        return f"ParamVector({preview}{layers})"


VectorLike = Union[ParamVector, ArrayLike]


def as_array(vector: VectorLike) -> np.ndarray:
    """Float64 1-D view of a ParamVector or array-like."""
    if isinstance(vector, ParamVector):
        return vector.values
    return np.asarray(vector, dtype=np.float64).reshape(-1)


def partition_of(*vectors: VectorLike) -> Partition | None:
    """First partition found among the arguments."""
    for vector in vectors:
        if isinstance(vector, ParamVector) and vector.partition is not None:
            return vector.partition
    return None
