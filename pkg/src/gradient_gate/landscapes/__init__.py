"""Toy losses, gated vector fields, descent trajectories and path integrals."""

from .descent import (
    DEFAULT_ALPHA,
    DEFAULT_LEVEL,
    DEFAULT_STEPS,
    DIVERGENCE_LOSS,
    TrajectoryRecord,
    convergence_time,
    descend,
    descend_many,
    sample_inits,
    summarize,
)
from .fields import (
    BUILTIN_NAMES,
    Field,
    MergedField,
    ScalarField,
    VectorField,
    as_update_field,
    builtin_field,
    gradient_field,
    merged_field,
    sum_field,
)
from .paths import PATH_A, PATH_B, Path, Segment, line_integral

__all__ = [
    "BUILTIN_NAMES",
    "DEFAULT_ALPHA",
    "DEFAULT_LEVEL",
    "DEFAULT_STEPS",
    "DIVERGENCE_LOSS",
    "PATH_A",
    "PATH_B",
    "Field",
    "MergedField",
    "Path",
    "ScalarField",
    "Segment",
    "TrajectoryRecord",
    "VectorField",
    "as_update_field",
    "builtin_field",
    "convergence_time",
    "descend",
    "descend_many",
    "gradient_field",
    "line_integral",
    "merged_field",
    "sample_inits",
    "sum_field",
    "summarize",
]
