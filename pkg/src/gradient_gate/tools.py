import functools
import logging
import time
from typing import Any, Callable, TypeVar

import numpy as np

logger = logging.getLogger(__name__)

T = TypeVar("T")  # For generic function typing


def timeit(func: Callable[..., T]) -> Callable[..., T]:
    """Decorator to log the execution time of a function."""

    @functools.wraps(func)
    def wrapper_timeit(*args: Any, **kwargs: Any) -> T:
        start_time = time.perf_counter()
        result = func(*args, **kwargs)
        elapsed_time = time.perf_counter() - start_time
        logger.info("Function '%s' executed in %.4f seconds", func.__name__, elapsed_time)
        return result

    return wrapper_timeit


def central_difference(func: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """
    Approximate the gradient of a scalar function with central differences.

    Args:
        func: Function mapping a float64 vector to a scalar.
        x: Point at which to differentiate.
        h: Step size per coordinate.

    Returns:
        Array of the same shape as ``x`` with ``(f(x+h e_i) - f(x-h e_i)) / 2h``.
    """
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + h
        upper = func(x)
        flat[i] = original - h
        lower = func(x)
        flat[i] = original
        out[i] = (upper - lower) / (2.0 * h)
    return grad


def relative_error(actual: np.ndarray, expected: np.ndarray, floor: float = 1.0) -> float:
    """
    Largest elementwise relative error, with absolute error used near zero.

    Args:
        actual: Computed values.
        expected: Reference values.
        floor: Magnitude below which the denominator is clamped.

    Returns:
        ``max |actual - expected| / max(|expected|, floor)``.
    """
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    denom = np.maximum(np.abs(expected), floor)
    return float(np.max(np.abs(actual - expected) / denom)) if actual.size else 0.0


def parse_number_list(text: str, cast: Callable[[str], T] = float) -> list[T]:
    """
    Parse a comma separated command-line list such as ``"0,0.1,1"``.

    Args:
        text: Comma separated values, whitespace allowed.
        cast: Conversion applied to every item.

    Returns:
        List of converted items, empty items skipped.
    """
    return [cast(item.strip()) for item in text.split(",") if item.strip()]
