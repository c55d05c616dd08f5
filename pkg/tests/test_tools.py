import logging

import numpy as np
import pytest

from gradient_gate.seeding import HIGHDIM, MAX_SEED, TOY_INITS, grid_stream, make_rng
from gradient_gate.tools import central_difference, parse_number_list, relative_error, timeit


def test_parse_number_list_floats():
    """Test parsing a comma separated float list."""
    assert parse_number_list("0,0.1, 1") == [0.0, 0.1, 1.0]


def test_parse_number_list_ints_skips_empty_items():
    """Test that empty items and whitespace are ignored."""
    assert parse_number_list(" 10, ,100,", int) == [10, 100]


def test_parse_number_list_empty():
    """Test handling of an empty string."""
    assert parse_number_list("") == []


def test_parse_number_list_invalid():
    """Test that malformed numbers raise ValueError."""
    with pytest.raises(ValueError, match="could not convert"):
        parse_number_list("1,abc")


def test_central_difference_quadratic():
    """Test central differences on a quadratic with a known gradient."""
    grad = central_difference(lambda x: float(np.sum(x**2) + x[0] * x[1]), np.array([1.0, -2.0]))
    np.testing.assert_allclose(grad, [2.0 - 2.0, -4.0 + 1.0], atol=1e-6)


def test_central_difference_does_not_modify_input():
    """Test that the evaluation point is left untouched."""
    x = np.array([0.5, 1.5])
    central_difference(lambda p: float(np.sum(p)), x)
    np.testing.assert_array_equal(x, [0.5, 1.5])


def test_relative_error_uses_floor_near_zero():
    """Test that small expected values fall back to the absolute error."""
    assert relative_error([1e-9], [0.0]) == pytest.approx(1e-9)
    assert relative_error([110.0], [100.0]) == pytest.approx(0.1)
    assert relative_error([], []) == 0.0


def test_timeit_logs_and_returns(caplog):
    """Test that the timing decorator passes the result through and logs."""

    @timeit
    def add(a, b):
        return a + b

    with caplog.at_level(logging.INFO, logger="gradient_gate.tools"):
        assert add(2, 3) == 5
    assert "add" in caplog.text


def test_make_rng_is_reproducible():
    """Test that the same seed and stream give the same draws."""
    first = make_rng(42, TOY_INITS).standard_normal(5)
    second = make_rng(42, TOY_INITS).standard_normal(5)
    np.testing.assert_array_equal(first, second)


def test_make_rng_streams_differ():
    """Test that different streams of one seed are independent draws."""
    a = make_rng(42, TOY_INITS).standard_normal(5)
    b = make_rng(42, HIGHDIM).standard_normal(5)
    c = make_rng(43, TOY_INITS).standard_normal(5)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_make_rng_accepts_full_seed_range():
    """Test the 64-bit seed bounds."""
    make_rng(MAX_SEED, MAX_SEED)
    with pytest.raises(ValueError, match="seed"):
        make_rng(-1)
    with pytest.raises(ValueError, match="seed"):
        make_rng(MAX_SEED + 1)


def test_grid_streams_are_unique():
    """Test that no two (pair, role) combinations share a stream."""
    streams = {grid_stream(pair, role) for pair in range(60) for role in range(40)}
    assert len(streams) == 60 * 40
    assert min(streams) > HIGHDIM + 1000
    with pytest.raises(ValueError, match="role"):
        grid_stream(0, 256)
