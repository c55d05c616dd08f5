"""Piecewise-linear paths and numerical line integrals of update fields."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from .fields import Field, as_update_field

DEFAULT_POINTS_PER_SEGMENT = 100_000
MIN_POINTS_PER_SEGMENT = 1_000


class Segment(BaseModel):
    model_config = ConfigDict(frozen=True)

    start: tuple[float, float]
    end: tuple[float, float]


class Path(BaseModel):
    """Connected sequence of straight segments."""

    model_config = ConfigDict(frozen=True)

    segments: tuple[Segment, ...]

    @model_validator(mode="after")
    def _connected(self) -> Path:
        if not self.segments:
            msg = "a path needs at least one segment"
            raise ValueError(msg)
        for before, after in zip(self.segments, self.segments[1:]):
            if before.end != after.start:
                msg = f"segments are not connected: {before.end} -> {after.start}"
                raise ValueError(msg)
        return self

    @classmethod
    def through(cls, points: Sequence[Sequence[float]]) -> Path:
        """Path visiting the given vertices in order."""
        vertices = [(float(p[0]), float(p[1])) for p in points]
        return cls(segments=tuple(Segment(start=a, end=b) for a, b in zip(vertices, vertices[1:])))


# Between (0, 0) and (2, 2): A goes up then right, B goes right then up.
PATH_A = Path.through([(0.0, 0.0), (0.0, 2.0), (2.0, 2.0)])
PATH_B = Path.through([(0.0, 0.0), (2.0, 0.0), (2.0, 2.0)])


def line_integral(field: Field, path: Path, n_per_segment: int = DEFAULT_POINTS_PER_SEGMENT) -> float:
    """
    Midpoint-rule approximation of the integral of ``field . ds`` along ``path``.

    Args:
        field: Update field, or a scalar loss whose gradient is integrated.
        path: Integration path.
        n_per_segment: Midpoints per segment, at least 1000.

    Raises:
        ValueError: If ``n_per_segment`` is below 1000.
        SingularityError: If the path crosses a singularity of the field.
    """
    if n_per_segment < MIN_POINTS_PER_SEGMENT:
        msg = f"n_per_segment must be >= {MIN_POINTS_PER_SEGMENT}, got {n_per_segment}"
        raise ValueError(msg)
    update = as_update_field(field)
    t = (np.arange(n_per_segment, dtype=np.float64) + 0.5) / n_per_segment
    total = 0.0
    for segment in path.segments:
        start = np.asarray(segment.start)
        delta = np.asarray(segment.end) - start
        points = start + t[:, None] * delta
        values = update(points)
        total += float(np.sum(values @ delta)) / n_per_segment
    return total
