"""Cosine gating of an auxiliary update against the main-task gradient.

The main-task gradient ``g`` and the auxiliary update ``v`` are combined as
``g + w * v`` where the weight ``w`` depends on their cosine similarity:

- ``weighted``:   ``w = max(0, cos)`` (and 0 below a non-zero threshold)
- ``unweighted``: ``w = 1`` if ``cos >= threshold`` else ``0``
- ``always_on``:  ``w = lam`` (plain weighted sum of losses)
- ``off``:        ``w = 0`` (main task only)

With ``weighted`` or ``unweighted`` (threshold >= 0) and the raw cosine,
``<g + w v, g> >= 0``, so the combined update is never an ascent direction
of the main loss.
"""

from __future__ import annotations

import logging
import math
from enum import Enum
from typing import NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..errors import DimensionMismatchError, NonFiniteError, PartitionError
from .params import Partition, ParamVector, VectorLike, as_array, partition_of

logger = logging.getLogger(__name__)


class GateMode(str, Enum):
    """How the auxiliary update is weighted."""

    WEIGHTED = "weighted"
    UNWEIGHTED = "unweighted"
    ALWAYS_ON = "always_on"
    OFF = "off"


class GateConfig(BaseModel):
    """Gating rule, threshold and cosine smoothing."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    mode: GateMode = GateMode.UNWEIGHTED
    threshold: float = Field(0.0, allow_inf_nan=False, description="Cosine threshold tau")
    ema_decay: float = Field(0.0, ge=0.0, lt=1.0, description="EMA decay beta; 0 disables smoothing")
    per_layer: bool = Field(False, description="Average per-layer cosines instead of one global cosine")
    lam: float = Field(1.0, ge=0.0, allow_inf_nan=False, description="Weight used by always_on")

    @classmethod
    def weighted(cls, threshold: float = 0.0, **kwargs) -> GateConfig:
        return cls(mode=GateMode.WEIGHTED, threshold=threshold, **kwargs)

    @classmethod
    def unweighted(cls, threshold: float = 0.0, **kwargs) -> GateConfig:
        return cls(mode=GateMode.UNWEIGHTED, threshold=threshold, **kwargs)

    @classmethod
    def always_on(cls, lam: float = 1.0, **kwargs) -> GateConfig:
        return cls(mode=GateMode.ALWAYS_ON, lam=lam, **kwargs)

    @classmethod
    def off(cls, **kwargs) -> GateConfig:
        return cls(mode=GateMode.OFF, **kwargs)


class CosineTracker(BaseModel):
    """Exponential moving average of the cosine; seeded by the first observation."""

    model_config = ConfigDict(frozen=True)

    smoothed: float = Field(0.0, ge=-1.0, le=1.0)
    initialized: bool = False


class GateDecision(BaseModel):
    """Outcome of gating one step."""

    model_config = ConfigDict(frozen=True)

    raw_cos: float = Field(ge=-1.0, le=1.0)
    smoothed_cos: float = Field(ge=-1.0, le=1.0)
    weight: float = Field(ge=0.0)

    def as_row(self, step: int) -> dict[str, float | int]:
        """CSV row ``(step, raw_cos, smoothed_cos, weight)``."""
        return {"step": step, "raw_cos": self.raw_cos, "smoothed_cos": self.smoothed_cos, "weight": self.weight}


def _pair(g: VectorLike, v: VectorLike) -> tuple[np.ndarray, np.ndarray]:
    g_arr = as_array(g)
    v_arr = as_array(v)
    if g_arr.shape != v_arr.shape:
        msg = f"dimension mismatch: {g_arr.size} vs {v_arr.size}"
        raise DimensionMismatchError(msg)
    if not (np.all(np.isfinite(g_arr)) and np.all(np.isfinite(v_arr))):
        msg = "cosine inputs must be finite"
        raise NonFiniteError(msg)
    return g_arr, v_arr


def _unit_scale(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Divide each row by its largest magnitude; zero rows stay zero."""
    peak = np.max(np.abs(rows), axis=-1, keepdims=True) if rows.shape[-1] else np.zeros(rows.shape[:-1] + (1,))
    nonzero = peak > 0.0
    scaled = np.divide(rows, peak, out=np.zeros_like(rows), where=nonzero)
    return scaled, nonzero[..., 0]


def cosine(g: VectorLike, v: VectorLike) -> float:
    """
    Cosine similarity clamped to [-1, 1]; 0 when either vector is zero.

    Args:
        g: Main-task gradient.
        v: Auxiliary update of the same length.

    Returns:
        ``<g, v> / (|g| |v|)``.

    Raises:
        DimensionMismatchError: If the lengths differ.
        NonFiniteError: If any input is NaN or infinite.
    """
    g_arr, v_arr = _pair(g, v)
    return float(cosine_rows(g_arr[None, :], v_arr[None, :])[0])


def cosine_rows(g_rows: np.ndarray, v_rows: np.ndarray) -> np.ndarray:
    """Row-wise cosine of two ``(..., d)`` arrays with the same conventions as :func:`cosine`."""
    g_rows = np.asarray(g_rows, dtype=np.float64)
    v_rows = np.asarray(v_rows, dtype=np.float64)
    if g_rows.shape != v_rows.shape:
        msg = f"dimension mismatch: {g_rows.shape} vs {v_rows.shape}"
        raise DimensionMismatchError(msg)
    g_unit, g_nonzero = _unit_scale(g_rows)
    v_unit, v_nonzero = _unit_scale(v_rows)
    gv = np.einsum("...i,...i->...", g_unit, v_unit)
    gg = np.einsum("...i,...i->...", g_unit, g_unit)
    vv = np.einsum("...i,...i->...", v_unit, v_unit)
    valid = g_nonzero & v_nonzero
    denom = np.sqrt(np.where(valid, gg * vv, 1.0))
    cos = np.where(valid, gv / denom, 0.0)
    return np.clip(cos, -1.0, 1.0)


def per_layer_cosine(g: VectorLike, v: VectorLike, partition: Partition | None = None) -> float:
    """
    Mean over layers of the per-layer cosine.

    Layers in which either sub-vector is zero contribute 0.

    Args:
        g: Main-task gradient.
        v: Auxiliary update.
        partition: Layer ranges; taken from ``g`` or ``v`` when omitted.

    Raises:
        PartitionError: If no partition is available or the vectors disagree on it.
    """
    g_arr, v_arr = _pair(g, v)
    if partition is None:
        partition = partition_of(g, v)
    if partition is None:
        msg = "per-layer cosine needs a partition"
        raise PartitionError(msg)
    checked = ParamVector(g_arr, partition).partition
    for vector in (g, v):
        if isinstance(vector, ParamVector) and vector.partition is not None and vector.partition != checked:
            msg = "g and v carry different partitions"
            raise PartitionError(msg)
    values = [cosine(g_arr[start:stop], v_arr[start:stop]) for start, stop in checked]
    return float(np.clip(np.mean(values), -1.0, 1.0))


def smooth(tracker: CosineTracker, c: float, beta: float) -> CosineTracker:
    """
    Fold one cosine observation into the moving average.

    The first observation seeds the average directly.

    Raises:
        ValueError: If ``c`` is outside [-1, 1] or ``beta`` outside [0, 1).
    """
    if not -1.0 <= c <= 1.0:
        msg = f"cosine must be in [-1, 1], got {c}"
        raise ValueError(msg)
    if not 0.0 <= beta < 1.0:
        msg = f"ema decay must be in [0, 1), got {beta}"
        raise ValueError(msg)
    if not tracker.initialized:
        return CosineTracker(smoothed=c, initialized=True)
    value = beta * tracker.smoothed + (1.0 - beta) * c
    return CosineTracker(smoothed=min(1.0, max(-1.0, value)), initialized=True)


def gate_weight(config: GateConfig, smoothed_cos: float) -> float:
    """Weight applied to the auxiliary update for a given (smoothed) cosine."""
    mode = config.mode
    if mode is GateMode.WEIGHTED:
        return max(0.0, smoothed_cos) if smoothed_cos >= config.threshold else 0.0
    if mode is GateMode.UNWEIGHTED:
        return 1.0 if smoothed_cos >= config.threshold else 0.0
    if mode is GateMode.ALWAYS_ON:
        return config.lam
    return 0.0


def gate_weights(config: GateConfig, cos: np.ndarray) -> np.ndarray:
    """Vectorised :func:`gate_weight`."""
    cos = np.asarray(cos, dtype=np.float64)
    mode = config.mode
    if mode is GateMode.WEIGHTED:
        return np.where(cos >= config.threshold, np.maximum(cos, 0.0), 0.0)
    if mode is GateMode.UNWEIGHTED:
        return np.where(cos >= config.threshold, 1.0, 0.0)
    if mode is GateMode.ALWAYS_ON:
        return np.full_like(cos, config.lam)
    return np.zeros_like(cos)


def combine(g: VectorLike, v: VectorLike, w: float) -> ParamVector:
    """
    Gated combination ``g + w * v``; returns ``g`` unchanged when ``w == 0``.

    Raises:
        DimensionMismatchError: If the lengths differ.
        ValueError: If ``w`` is negative or not finite.
    """
    if not (math.isfinite(w) and w >= 0.0):
        msg = f"gate weight must be finite and >= 0, got {w}"
        raise ValueError(msg)
    g_arr, v_arr = _pair(g, v)
    partition = partition_of(g, v)
    if w == 0.0:
        return ParamVector(g_arr, partition)
    return ParamVector(g_arr + w * v_arr, partition)


def step(params: VectorLike, update: VectorLike, alpha: float) -> ParamVector:
    """
    One steepest-descent step ``params - alpha * update``.

    Raises:
        ValueError: If ``alpha`` is not positive.
        NonFiniteError: If the result is not finite (divergence).
    """
    if not alpha > 0.0:
        msg = f"step size must be positive, got {alpha}"
        raise ValueError(msg)
    p_arr = as_array(params)
    u_arr = as_array(update)
    if p_arr.shape != u_arr.shape:
        msg = f"dimension mismatch: {p_arr.size} vs {u_arr.size}"
        raise DimensionMismatchError(msg)
    with np.errstate(over="ignore", invalid="ignore"):
        result = p_arr - alpha * u_arr
    if not np.all(np.isfinite(result)):
        msg = "step produced non-finite parameters (diverged)"
        raise NonFiniteError(msg)
    return ParamVector(result, partition_of(params, update))


def gate_decision(
    config: GateConfig,
    g: VectorLike,
    v: VectorLike,
    tracker: CosineTracker | None = None,
) -> tuple[GateDecision, CosineTracker]:
    """
    Cosine, optional smoothing and gate weight for one step.

    Args:
        config: Gating rule.
        g: Main-task gradient on the shared parameters.
        v: Auxiliary update on the shared parameters.
        tracker: Moving-average state from the previous step.

    Returns:
        The decision and the updated tracker.
    """
    raw = per_layer_cosine(g, v) if config.per_layer else cosine(g, v)
    tracker = tracker or CosineTracker()
    if config.ema_decay > 0.0:
        tracker = smooth(tracker, raw, config.ema_decay)
        smoothed = tracker.smoothed
    else:
        tracker = CosineTracker(smoothed=raw, initialized=True)
        smoothed = raw
    decision = GateDecision(raw_cos=raw, smoothed_cos=smoothed, weight=gate_weight(config, smoothed))
    logger.debug("gate raw_cos=%.4f smoothed=%.4f weight=%.3f", raw, smoothed, decision.weight)
    return decision, tracker


class PartitionedUpdate(NamedTuple):
    theta: ParamVector
    phi_main: ParamVector
    phi_aux: ParamVector
    decision: GateDecision
    tracker: CosineTracker


def partitioned_step(
    theta: VectorLike,
    phi_main: VectorLike,
    phi_aux: VectorLike,
    grad_theta_main: VectorLike,
    grad_theta_aux: VectorLike,
    grad_phi_main: VectorLike,
    grad_phi_aux: VectorLike,
    config: GateConfig,
    alpha: float,
    tracker: CosineTracker | None = None,
) -> PartitionedUpdate:
    """
    Update shared and task-specific parameters.

    Shared parameters follow the gated combination of both tasks' gradients;
    each head follows only its own task's gradient. The returned decision
    reflects the shared-parameter cosine only.

    Raises:
        DimensionMismatchError: If any gradient does not match its parameters.
    """
    decision, tracker = gate_decision(config, grad_theta_main, grad_theta_aux, tracker)
    update = combine(grad_theta_main, grad_theta_aux, decision.weight)
    return PartitionedUpdate(
        theta=step(theta, update, alpha),
        phi_main=step(phi_main, grad_phi_main, alpha),
        phi_aux=step(phi_aux, grad_phi_aux, alpha),
        decision=decision,
        tracker=tracker,
    )
