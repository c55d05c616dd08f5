"""Fully-connected ReLU trunk with one linear classification head per task.

Layers compute ``x @ W + b`` with ``W`` of shape ``(fan_in, fan_out)``.
Flattened parameters list each layer's weights row-major, then its bias,
with one partition range per layer.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from typing import NamedTuple

import numpy as np

from ..core import ParamVector
from ..errors import DimensionMismatchError

logger = logging.getLogger(__name__)

INPUT_SIZE = 784
HIDDEN_SIZES = (100, 100, 100)
N_CLASSES = 10
HEADS = ("main", "aux")

Layer = tuple[np.ndarray, np.ndarray]


def _flatten(layers: Sequence[Layer]) -> ParamVector:
    return ParamVector.from_parts([np.concatenate([w.reshape(-1), b]) for w, b in layers])


def _unflatten(vector: ParamVector, like: Sequence[Layer]) -> list[Layer]:
    values = np.asarray(vector)
    expected = sum(w.size + b.size for w, b in like)
    if values.size != expected:
        msg = f"expected {expected} parameters, got {values.size}"
        raise DimensionMismatchError(msg)
    layers, offset = [], 0
    for w, b in like:
        new_w = values[offset : offset + w.size].reshape(w.shape).copy()
        offset += w.size
        new_b = values[offset : offset + b.size].copy()
        offset += b.size
        layers.append((new_w, new_b))
    return layers


class DenseNet:
    """Shared trunk plus named heads; parameters are plain numpy arrays."""

    def __init__(self, trunk: Sequence[Layer], heads: dict[str, Layer]):
        self.trunk = [(np.asarray(w, dtype=np.float64), np.asarray(b, dtype=np.float64)) for w, b in trunk]
        self.heads = {
            name: (np.asarray(w, dtype=np.float64), np.asarray(b, dtype=np.float64)) for name, (w, b) in heads.items()
        }
        width = self.trunk[-1][0].shape[1] if self.trunk else None
        for name, (w, _) in self.heads.items():
            if width is not None and w.shape[0] != width:
                msg = f"head {name} expects {w.shape[0]} inputs, trunk provides {width}"
                raise DimensionMismatchError(msg)

    @classmethod
    def initialize(
        cls,
        rng: np.random.Generator,
        input_size: int = INPUT_SIZE,
        hidden: Sequence[int] = HIDDEN_SIZES,
        n_classes: int = N_CLASSES,
        heads: Sequence[str] = HEADS,
    ) -> DenseNet:
        """Glorot-uniform weights in ``+-sqrt(6 / (fan_in + fan_out))`` and zero biases."""

        def layer(fan_in: int, fan_out: int) -> Layer:
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            return rng.uniform(-limit, limit, size=(fan_in, fan_out)), np.zeros(fan_out)

        sizes = [input_size, *hidden]
        trunk = [layer(a, b) for a, b in zip(sizes, sizes[1:])]
        return cls(trunk, {name: layer(sizes[-1], n_classes) for name in heads})

    @classmethod
    def zeros(
        cls,
        input_size: int = INPUT_SIZE,
        hidden: Sequence[int] = HIDDEN_SIZES,
        n_classes: int = N_CLASSES,
        heads: Sequence[str] = HEADS,
    ) -> DenseNet:
        sizes = [input_size, *hidden]
        trunk = [(np.zeros((a, b)), np.zeros(b)) for a, b in zip(sizes, sizes[1:])]
        return cls(trunk, {name: (np.zeros((sizes[-1], n_classes)), np.zeros(n_classes)) for name in heads})

    @property
    def n_params(self) -> int:
        trunk = sum(w.size + b.size for w, b in self.trunk)
        return trunk + sum(w.size + b.size for w, b in self.heads.values())

    def shared(self) -> ParamVector:
        return _flatten(self.trunk)

    def head(self, name: str) -> ParamVector:
        return _flatten([self.head_layer(name)])

    def set_shared(self, params: ParamVector) -> None:
        self.trunk = _unflatten(params, self.trunk)

    def set_head(self, name: str, params: ParamVector) -> None:
        self.heads[name] = _unflatten(params, [self.head_layer(name)])[0]

    def copy(self) -> DenseNet:
        return DenseNet(
            [(w.copy(), b.copy()) for w, b in self.trunk],
            {name: (w.copy(), b.copy()) for name, (w, b) in self.heads.items()},
        )

    def head_layer(self, name: str) -> Layer:
        try:
            return self.heads[name]
        except KeyError:
            msg = f"unknown head {name!r}; available: {', '.join(self.heads)}"
            raise KeyError(msg) from None


class Cache(NamedTuple):
    """Layer inputs of the trunk and the head input, plus the logits."""

    inputs: list[np.ndarray]
    features: np.ndarray
    logits: np.ndarray
    head: str


class Gradients(NamedTuple):
    shared: ParamVector
    head: ParamVector
    loss: float


def _as_batch(batch: np.ndarray, input_size: int) -> np.ndarray:
    x = np.asarray(batch, dtype=np.float64)
    x = x.reshape(x.shape[0], -1) if x.ndim > 1 else x.reshape(1, -1)
    if x.shape[1] != input_size:
        msg = f"expected {input_size} input features, got {x.shape[1]}"
        raise DimensionMismatchError(msg)
    return x


def forward(net: DenseNet, batch: np.ndarray, head: str) -> tuple[np.ndarray, Cache]:
    """
    Logits of ``head`` for a batch of images or flat inputs.

    Returns:
        ``(logits, cache)`` with logits of shape ``(n, n_classes)``.
    """
    x = _as_batch(batch, net.trunk[0][0].shape[0] if net.trunk else net.head_layer(head)[0].shape[0])
    inputs = []
    for w, b in net.trunk:
        inputs.append(x)
        x = np.maximum(x @ w + b, 0.0)
    w_head, b_head = net.head_layer(head)
    logits = x @ w_head + b_head
    return logits, Cache(inputs, x, logits, head)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits, axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / np.sum(exp, axis=1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean softmax cross-entropy."""
    shifted = logits - np.max(logits, axis=1, keepdims=True)
    log_probs = shifted - np.log(np.sum(np.exp(shifted), axis=1, keepdims=True))
    return float(-np.mean(log_probs[np.arange(len(labels)), labels]))


def backward(net: DenseNet, cache: Cache, labels: np.ndarray) -> Gradients:
    """
    Exact gradients of the mean cross-entropy of ``cache.head``.

    Returns:
        Trunk gradient (one partition range per layer), gradient of the
        head that produced ``cache`` and the batch loss.
    """
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.shape[0]
    if cache.logits.shape[0] != n:
        msg = f"{cache.logits.shape[0]} logits rows but {n} labels"
        raise DimensionMismatchError(msg)
    delta = softmax(cache.logits)
    delta[np.arange(n), labels] -= 1.0
    delta /= n

    w_head, _ = net.head_layer(cache.head)
    head_grad = (cache.features.T @ delta, delta.sum(axis=0))
    upstream = delta @ w_head.T
    activations = [*cache.inputs[1:], cache.features]

    trunk_grads: list[Layer] = []
    for (w, _), x, out in zip(reversed(net.trunk), reversed(cache.inputs), reversed(activations)):
        upstream = upstream * (out > 0.0)
        trunk_grads.append((x.T @ upstream, upstream.sum(axis=0)))
        upstream = upstream @ w.T
    trunk_grads.reverse()
    return Gradients(_flatten(trunk_grads), _flatten([head_grad]), cross_entropy(cache.logits, labels))


def predict(net: DenseNet, images: np.ndarray, head: str = "main", batch_size: int = 1_000) -> np.ndarray:
    """Argmax class per input; ties go to the lowest class index."""
    images = np.asarray(images)
    out = []
    for start in range(0, len(images), batch_size):
        logits, _ = forward(net, images[start : start + batch_size], head)
        out.append(np.argmax(logits, axis=1))
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def test_error(net: DenseNet, images: np.ndarray, labels: np.ndarray, head: str = "main") -> float:
    """Percentage of misclassified inputs."""
    labels = np.asarray(labels)
    if labels.size == 0:
        return 0.0
    return float(100.0 * np.mean(predict(net, images, head) != labels))
