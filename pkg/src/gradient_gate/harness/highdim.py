"""Cosine similarity of random vector pairs as the dimension grows.

Independent Gaussian pairs become orthogonal (|cos| ~ 1/sqrt(d)), while
pairs sharing a common random mean keep a cosine near ``1 / (1 + sigma**2)``.
"""

from __future__ import annotations

import itertools
import logging
from collections.abc import Sequence
from typing import Literal

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from ..core import cosine_rows
from ..seeding import HIGHDIM, make_rng
from .emit import HIGHDIM as HIGHDIM_SCHEMA

logger = logging.getLogger(__name__)

PairKind = Literal["random", "corrupted"]

# Upper bound on the number of floats drawn per block.
_BLOCK_VALUES = 2_000_000


class CosineSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: PairKind
    d: int
    sigma: float
    n: int
    mean_cos: float
    median_cos: float
    mean_abs_cos: float
    median_abs_cos: float

    @classmethod
    def of(cls, kind: PairKind, d: int, sigma: float, cos: np.ndarray) -> CosineSummary:
        magnitude = np.abs(cos)
        return cls(
            kind=kind,
            d=d,
            sigma=sigma,
            n=len(cos),
            mean_cos=float(np.mean(cos)),
            median_cos=float(np.median(cos)),
            mean_abs_cos=float(np.mean(magnitude)),
            median_abs_cos=float(np.median(magnitude)),
        )


def _check(d: int, n: int, sigma: float) -> None:
    if d < 1 or n < 1:
        msg = f"d and n must be >= 1, got d={d}, n={n}"
        raise ValueError(msg)
    if sigma < 0.0:
        msg = f"sigma must be >= 0, got {sigma}"
        raise ValueError(msg)


def _blocks(n: int, d: int) -> list[int]:
    size = max(1, _BLOCK_VALUES // d)
    return [min(size, n - start) for start in range(0, n, size)]


def pair_cosines(kind: PairKind, d: int, n: int, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """
    Cosines of ``n`` independent pairs drawn in blocks.

    ``random``: both vectors ~ N(0, sigma^2 I_d). ``corrupted``: a shared
    mean ~ N(0, I_d) plus independent N(0, sigma^2 I_d) noise per vector.
    """
    _check(d, n, sigma)
    out = []
    for rows in _blocks(n, d):
        if kind == "random":
            first = rng.standard_normal((rows, d)) * sigma
            second = rng.standard_normal((rows, d)) * sigma
        elif kind == "corrupted":
            mean = rng.standard_normal((rows, d))
            first = mean + rng.standard_normal((rows, d)) * sigma
            second = mean + rng.standard_normal((rows, d)) * sigma
        else:
            msg = f"unknown pair kind {kind!r}"
            raise ValueError(msg)
        out.append(cosine_rows(first, second))
    return np.concatenate(out)


def random_cosine_stats(d: int, n: int, sigma: float, rng: np.random.Generator) -> CosineSummary:
    """Summary of cosines between independent N(0, sigma^2 I_d) pairs."""
    return CosineSummary.of("random", d, sigma, pair_cosines("random", d, n, sigma, rng))


def corrupted_cosine_stats(d: int, n: int, sigma: float, rng: np.random.Generator) -> CosineSummary:
    """Summary of cosines between two noisy copies of a shared N(0, I_d) vector."""
    return CosineSummary.of("corrupted", d, sigma, pair_cosines("corrupted", d, n, sigma, rng))


_STATS = {"random": random_cosine_stats, "corrupted": corrupted_cosine_stats}


def highdim_study(
    dims: Sequence[int],
    sigmas: Sequence[float],
    n: int,
    kinds: Sequence[PairKind] = ("random", "corrupted"),
    seed: int = 0,
) -> pd.DataFrame:
    """
    One summary row per ``(kind, d, sigma)``.

    Each combination draws from stream ``HIGHDIM + i``, ``i`` being its
    position in the ``kinds x dims x sigmas`` enumeration.
    """
    rows = []
    for index, (kind, d, sigma) in enumerate(itertools.product(kinds, dims, sigmas)):
        summary = _STATS[kind](int(d), n, float(sigma), make_rng(seed, HIGHDIM + index))
        logger.debug(
            "%s d=%d sigma=%g: mean cos %.4f, median |cos| %.4f",
            kind,
            d,
            sigma,
            summary.mean_cos,
            summary.median_abs_cos,
        )
        rows.append(summary.model_dump())
    return pd.DataFrame(rows, columns=HIGHDIM_SCHEMA.names)
