"""Uncentered RMSprop without momentum."""

from __future__ import annotations

import numpy as np

from ..core import ParamVector, VectorLike, as_array, partition_of
from ..errors import DimensionMismatchError


class RMSPropState:
    """Accumulator of squared gradients for one parameter block."""

    def __init__(self, size: int, lr: float = 0.001, rho: float = 0.9, eps: float = 1e-8):
        if not lr > 0.0:
            msg = f"learning rate must be positive, got {lr}"
            raise ValueError(msg)
        if not 0.0 <= rho < 1.0:
            msg = f"rho must be in [0, 1), got {rho}"
            raise ValueError(msg)
        self.acc = np.zeros(size)
        self.lr = lr
        self.rho = rho
        self.eps = eps

    def __repr__(self) -> str:
        return f"RMSPropState(size={self.acc.size}, lr={self.lr}, rho={self.rho}, eps={self.eps})"


def rmsprop_step(
    state: RMSPropState,
    params: VectorLike,
    grads: VectorLike,
    stat_grads: VectorLike | None = None,
) -> ParamVector:
    """
    One RMSprop step; updates ``state.acc`` in place.

    ``acc <- rho * acc + (1 - rho) * s**2`` and
    ``p <- p - lr * g / (sqrt(acc) + eps)`` where ``s`` is ``stat_grads``
    (defaults to ``g``).

    Raises:
        DimensionMismatchError: If params, grads or the accumulator differ in size.
    """
    p = as_array(params)
    g = as_array(grads)
    s = g if stat_grads is None else as_array(stat_grads)
    if not (p.shape == g.shape == s.shape == state.acc.shape):
        msg = f"shape mismatch: params {p.shape}, grads {g.shape}, stats {s.shape}, accumulator {state.acc.shape}"
        raise DimensionMismatchError(msg)
    state.acc = state.rho * state.acc + (1.0 - state.rho) * s * s
    return ParamVector(p - state.lr * g / (np.sqrt(state.acc) + state.eps), partition_of(params, grads))
