"""Steepest-descent trajectories on the toy landscapes."""

from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict

from .fields import MergedField, ScalarField, VectorField

logger = logging.getLogger(__name__)

DEFAULT_STEPS = 600
DEFAULT_ALPHA = 0.01
DEFAULT_LEVEL = 0.1
DIVERGENCE_LOSS = 1e6

Box = tuple[tuple[float, float], tuple[float, float]]


class TrajectoryRecord(BaseModel):
    """One descent run.

    ``points[t]`` is the iterate after ``t`` steps and ``main_loss[t]`` its
    main loss. ``cos[t]`` and ``weight[t]`` describe the gate used for the
    step leaving ``points[t]``; they are NaN for ungated fields and for the
    final point.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    points: np.ndarray
    main_loss: np.ndarray
    cos: np.ndarray
    weight: np.ndarray
    convergence_step: int | None = None
    diverged: bool = False

    def __len__(self) -> int:
        return len(self.main_loss)


def convergence_time(traj: TrajectoryRecord, level: float = DEFAULT_LEVEL) -> int | None:
    """First index at which the main loss is below ``level``."""
    below = np.flatnonzero(np.asarray(traj.main_loss) < level)
    return int(below[0]) if below.size else None


def _evaluate(field: VectorField, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if isinstance(field, MergedField):
        return field.evaluate(points)
    nan = np.full(points.shape[0], np.nan)
    return field(points), nan, nan


def descend_many(
    field: VectorField,
    inits: ArrayLike,
    main: ScalarField,
    steps: int = DEFAULT_STEPS,
    alpha: float = DEFAULT_ALPHA,
    level: float = DEFAULT_LEVEL,
) -> list[TrajectoryRecord]:
    """
    Iterate ``x <- x - alpha * field(x)`` from several inits at once.

    A run stops early, flagged as diverged, when its main loss exceeds 1e6,
    becomes non-finite, or the field is evaluated at one of its singular
    points. Divergence is recorded, never raised.

    Args:
        field: Update field.
        inits: Array of shape ``(n, arity)``.
        main: Main loss, recorded at every iterate.
        steps: Number of steps per run.
        alpha: Constant step size.
        level: Convergence threshold on the main loss.

    Returns:
        One record per init, in input order.
    """
    if steps <= 0:
        msg = f"steps must be positive, got {steps}"
        raise ValueError(msg)
    start = np.asarray(inits, dtype=np.float64).reshape(-1, field.arity)
    if not np.all(np.isfinite(start)):
        msg = "descent inits must be finite"
        raise ValueError(msg)
    n_runs, arity = start.shape

    points = np.full((steps + 1, n_runs, arity), np.nan)
    losses = np.full((steps + 1, n_runs), np.nan)
    cos = np.full((steps + 1, n_runs), np.nan)
    weight = np.full((steps + 1, n_runs), np.nan)
    lengths = np.full(n_runs, steps + 1)
    diverged = np.zeros(n_runs, dtype=bool)
    active = np.ones(n_runs, dtype=bool)

    with np.errstate(over="ignore", invalid="ignore"):
        points[0] = start
        losses[0] = main.value(start)
        for t in range(steps):
            idx = np.flatnonzero(active)
            if idx.size == 0:
                break
            singular = field.is_singular(points[t, idx])
            if np.any(singular):
                hit = idx[singular]
                logger.warning("%d run(s) of %s reached a singular point at step %d", hit.size, field.name, t)
                diverged[hit] = True
                active[hit] = False
                lengths[hit] = t + 1
                idx = idx[~singular]
                if idx.size == 0:
                    break
            update, step_cos, step_weight = _evaluate(field, points[t, idx])
            cos[t, idx] = step_cos
            weight[t, idx] = step_weight
            new_points = points[t, idx] - alpha * update
            new_losses = main.value(new_points)
            points[t + 1, idx] = new_points
            losses[t + 1, idx] = new_losses
            bad = ~np.isfinite(new_losses) | (new_losses > DIVERGENCE_LOSS) | ~np.all(np.isfinite(new_points), axis=-1)
            if np.any(bad):
                stopped = idx[bad]
                diverged[stopped] = True
                active[stopped] = False
                lengths[stopped] = t + 2

    records = []
    for run in range(n_runs):
        length = lengths[run]
        record = TrajectoryRecord(
            points=points[:length, run].copy(),
            main_loss=losses[:length, run].copy(),
            cos=cos[:length, run].copy(),
            weight=weight[:length, run].copy(),
            diverged=bool(diverged[run]),
        )
        record.convergence_step = convergence_time(record, level)
        records.append(record)
    return records


def descend(
    field: VectorField,
    init: ArrayLike,
    main: ScalarField,
    steps: int = DEFAULT_STEPS,
    alpha: float = DEFAULT_ALPHA,
    level: float = DEFAULT_LEVEL,
) -> TrajectoryRecord:
    """Single-init form of :func:`descend_many`."""
    return descend_many(field, np.reshape(init, (1, -1)), main, steps=steps, alpha=alpha, level=level)[0]


def sample_inits(
    rng: np.random.Generator,
    n: int,
    box: Box = ((-3.0, 3.0), (-3.0, 3.0)),
    min_radius: float = 0.5,
) -> np.ndarray:
    """
    Draw ``n`` inits uniformly from ``box``, redrawing those within ``min_radius`` of the origin.

    Returns:
        Array of shape ``(n, 2)``.
    """
    (x_lo, x_hi), (y_lo, y_hi) = box
    out = np.empty((0, 2))
    while len(out) < n:
        candidates = np.column_stack(
            [rng.uniform(x_lo, x_hi, size=n), rng.uniform(y_lo, y_hi, size=n)],
        )
        keep = np.hypot(candidates[:, 0], candidates[:, 1]) >= min_radius
        out = np.vstack([out, candidates[keep]])
    return out[:n]


def summarize(records: Sequence[TrajectoryRecord]) -> dict[str, float | int | None]:
    """Run count, converged/diverged counts and convergence-time statistics."""
    times = [r.convergence_step for r in records if r.convergence_step is not None]
    return {
        "runs": len(records),
        "converged": len(times),
        "diverged": sum(r.diverged for r in records),
        "median_convergence_time": float(np.median(times)) if times else None,
        "mean_convergence_time": float(np.mean(times)) if times else None,
    }
