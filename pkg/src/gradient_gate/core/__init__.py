"""Cosine computation, smoothing, gating and partitioned update rules."""

from .gating import (
    CosineTracker,
    GateConfig,
    GateDecision,
    GateMode,
    PartitionedUpdate,
    combine,
    cosine,
    cosine_rows,
    gate_decision,
    gate_weight,
    gate_weights,
    partitioned_step,
    per_layer_cosine,
    smooth,
    step,
)
from .params import Partition, ParamVector, VectorLike, as_array, partition_of

__all__ = [
    "CosineTracker",
    "GateConfig",
    "GateDecision",
    "GateMode",
    "ParamVector",
    "Partition",
    "PartitionedUpdate",
    "VectorLike",
    "as_array",
    "combine",
    "cosine",
    "cosine_rows",
    "gate_decision",
    "gate_weight",
    "gate_weights",
    "partition_of",
    "partitioned_step",
    "per_layer_cosine",
    "smooth",
    "step",
]
