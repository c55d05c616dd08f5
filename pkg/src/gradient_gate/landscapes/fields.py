"""Analytic toy losses, vector fields and their gated merge.

All evaluators are vectorised: a point is an array whose last axis has
``arity`` entries, so a single point has shape ``(arity,)`` and a batch
``(n, arity)``.
"""

from __future__ import annotations

import logging
import re
from typing import Callable, Union

import numpy as np
from numpy.typing import ArrayLike

from ..core import GateConfig, ParamVector, cosine_rows, gate_weights
from ..errors import DimensionMismatchError, SingularityError, UnknownFieldError

logger = logging.getLogger(__name__)

ArrayFn = Callable[[np.ndarray], np.ndarray]


def _points(points: ArrayLike, arity: int) -> np.ndarray:
    array = np.asarray(points, dtype=np.float64)
    if array.shape[-1:] != (arity,):
        msg = f"expected points with last axis {arity}, got shape {array.shape}"
        raise DimensionMismatchError(msg)
    return array


class ScalarField:
    """Scalar loss with an exact, hand-coded gradient."""

    def __init__(
        self,
        name: str,
        arity: int,
        value: ArrayFn,
        grad: ArrayFn,
        nonsmooth: ArrayFn | None = None,
    ):
        self.name = name
        self.arity = arity
        self._value = value
        self._grad = grad
        self._nonsmooth = nonsmooth

    def value(self, points: ArrayLike) -> np.ndarray:
        return self._value(_points(points, self.arity))

    def grad(self, points: ArrayLike) -> np.ndarray:
        return self._grad(_points(points, self.arity))

    def __call__(self, points: ArrayLike) -> np.ndarray:
        return self.value(points)

    def gradient_at(self, point: ArrayLike) -> ParamVector:
        """Gradient at a single point as a ParamVector."""
        return ParamVector(self.grad(np.reshape(point, (self.arity,))))

    def is_nonsmooth(self, points: ArrayLike) -> np.ndarray:
        """Mask of points on a declared non-smooth locus."""
        array = _points(points, self.arity)
        if self._nonsmooth is None:
            return np.zeros(array.shape[:-1], dtype=bool)
        return self._nonsmooth(array)

    def __repr__(self) -> str:
        return f"ScalarField({self.name!r})"


class VectorField:
    """Arbitrary update field; raises on its declared singularities."""

    def __init__(self, name: str, arity: int, func: ArrayFn, singular: ArrayFn | None = None):
        self.name = name
        self.arity = arity
        self._func = func
        self._singular = singular

    def __call__(self, points: ArrayLike) -> np.ndarray:
        array = _points(points, self.arity)
        if self._singular is not None and np.any(self._singular(array)):
            msg = f"field {self.name} evaluated at a singular point"
            raise SingularityError(msg)
        return self._func(array)

    def is_singular(self, points: ArrayLike) -> np.ndarray:
        array = _points(points, self.arity)
        if self._singular is None:
            return np.zeros(array.shape[:-1], dtype=bool)
        return self._singular(array)

    def __repr__(self) -> str:
        return f"VectorField({self.name!r})"


Field = Union[ScalarField, VectorField]


def as_update_field(field: Field) -> VectorField:
    """The update a field contributes: its gradient for losses, itself otherwise."""
    if isinstance(field, VectorField):
        return field
    return gradient_field(field)


def gradient_field(scalar: ScalarField) -> VectorField:
    return VectorField(f"grad({scalar.name})", scalar.arity, scalar.grad)


class MergedField(VectorField):
    """Main-loss gradient plus the cosine-gated auxiliary update."""

    def __init__(self, main: ScalarField, aux: Field, config: GateConfig):
        if main.arity != aux.arity:
            msg = f"arity mismatch: {main.name} has {main.arity}, {aux.name} has {aux.arity}"
            raise DimensionMismatchError(msg)
        self.main = main
        self.aux = as_update_field(aux)
        self.config = config
        super().__init__(f"merged({main.name},{aux.name},{config.mode.value})", main.arity, self._merged)

    def evaluate(self, points: ArrayLike) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Merged update together with the cosine and gate weight at each point."""
        array = _points(points, self.arity)
        grad_main = self.main.grad(array)
        update_aux = self.aux(array)
        cos = cosine_rows(grad_main, update_aux)
        weight = gate_weights(self.config, cos)
        merged = np.where(weight[..., None] > 0.0, grad_main + weight[..., None] * update_aux, grad_main)
        return merged, cos, weight

    def _merged(self, points: np.ndarray) -> np.ndarray:
        return self.evaluate(points)[0]

    def is_singular(self, points: ArrayLike) -> np.ndarray:
        return self.aux.is_singular(points)


def merged_field(main: ScalarField, aux: Field, config: GateConfig) -> MergedField:
    """
    Pointwise ``combine(grad main, aux update, gate_weight(config, cos))`` with the raw cosine.

    Args:
        main: Main loss.
        aux: Auxiliary loss (its gradient is used) or an arbitrary update field.
        config: Gating rule; smoothing does not apply to static fields.

    Returns:
        The merged field; evaluation at a singularity of ``aux`` raises.
    """
    return MergedField(main, aux, config)


def sum_field(main: ScalarField, aux: Field) -> VectorField:
    """Ungated ``grad main + aux update``."""
    update = as_update_field(aux)

    def func(points: np.ndarray) -> np.ndarray:
        return main.grad(points) + update(points)

    return VectorField(f"sum({main.name},{aux.name})", main.arity, func, update.is_singular)


# ---------------------------------------------------------------------------
# Builtins


def _radius_sq(p: np.ndarray) -> np.ndarray:
    return p[..., 0] ** 2 + p[..., 1] ** 2


def _quadratic(name: str, center: tuple[float, ...]) -> ScalarField:
    c = np.asarray(center, dtype=np.float64)
    return ScalarField(
        name,
        len(center),
        lambda p: np.sum((p - c) ** 2, axis=-1),
        lambda p: 2.0 * (p - c),
    )


def _l2_value(p: np.ndarray) -> np.ndarray:
    r2 = _radius_sq(p)
    return np.where(p[..., 0] <= 0.0, r2, 1.0 - np.exp(-2.0 * r2))


def _l2_grad(p: np.ndarray) -> np.ndarray:
    r2 = _radius_sq(p)[..., None]
    left = p[..., 0:1] <= 0.0
    return np.where(left, 2.0 * p, 4.0 * p * np.exp(-2.0 * r2))


def _swirl(p: np.ndarray) -> np.ndarray:
    r2 = _radius_sq(p)
    x, y = p[..., 0], p[..., 1]
    return np.stack([-y / r2 - 2.0 * x, x / r2 - 2.0 * y], axis=-1)


def _in_prop3_box(p: np.ndarray) -> np.ndarray:
    x, y = p[..., 0], p[..., 1]
    return (x >= 1.0) & (x <= 2.0) & (y >= 0.0) & (y <= 1.0)


def _on_prop3_box_edge(p: np.ndarray) -> np.ndarray:
    x, y = p[..., 0], p[..., 1]
    on_x = np.isclose(x, 1.0) | np.isclose(x, 2.0)
    on_y = np.isclose(y, 0.0) | np.isclose(y, 1.0)
    near = (x >= 1.0 - 1e-6) & (x <= 2.0 + 1e-6) & (y >= -1e-6) & (y <= 1.0 + 1e-6)
    return near & (on_x | on_y)


def _prop3_main(a: float) -> ScalarField:
    return ScalarField(
        f"prop3_main({a:g})",
        2,
        lambda p: a * p[..., 0],
        lambda p: np.stack([np.full(p.shape[:-1], a), np.zeros(p.shape[:-1])], axis=-1),
    )


def _prop3_aux(a: float) -> ScalarField:
    def value(p: np.ndarray) -> np.ndarray:
        return np.where(_in_prop3_box(p), a * p[..., 0], 0.0)

    def grad(p: np.ndarray) -> np.ndarray:
        inside = _in_prop3_box(p)
        return np.stack([np.where(inside, a, 0.0), np.zeros(p.shape[:-1])], axis=-1)

    return ScalarField(f"prop3_aux({a:g})", 2, value, grad, nonsmooth=_on_prop3_box_edge)


_BUILTINS: dict[str, Callable[[float], Field]] = {
    "quad1d_main": lambda _a: _quadratic("quad1d_main", (10.0,)),
    "quad1d_aux": lambda _a: _quadratic("quad1d_aux", (0.0,)),
    "L1": lambda _a: _quadratic("L1", (0.0, 0.0)),
    "L2": lambda _a: ScalarField("L2", 2, _l2_value, _l2_grad, nonsmooth=lambda p: np.isclose(p[..., 0], 0.0)),
    "L3": lambda _a: _quadratic("L3", (1.0, 1.0)),
    "L4": lambda _a: _quadratic("L4", (2.0, 0.5)),
    "V": lambda _a: VectorField("V", 2, _swirl, singular=lambda p: _radius_sq(p) == 0.0),
    "prop3_main": _prop3_main,
    "prop3_aux": _prop3_aux,
}

_NAME_PATTERN = re.compile(r"^\s*(?P<name>\w+)\s*(?:\(\s*(?P<arg>[-+0-9.eE]+)\s*\))?\s*$")

BUILTIN_NAMES = tuple(_BUILTINS)


def builtin_field(name: str, a: float | None = None) -> Field:
    """
    Look up a builtin loss or vector field.

    Args:
        name: One of ``quad1d_main``, ``quad1d_aux``, ``L1``..``L4``, ``V``,
            ``prop3_main``, ``prop3_aux``. The parametrised losses also
            accept the form ``prop3_main(2.5)``.
        a: Slope of the ``prop3_*`` losses (default 1).

    Raises:
        UnknownFieldError: If the name is not a builtin.
    """
    match = _NAME_PATTERN.match(name)
    key = match.group("name") if match else name
    if key not in _BUILTINS:
        msg = f"unknown field {name!r}; expected one of {', '.join(BUILTIN_NAMES)}"
        raise UnknownFieldError(msg)
    if a is None:
        a = float(match.group("arg")) if match and match.group("arg") else 1.0
    return _BUILTINS[key](a)
