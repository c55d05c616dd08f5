import numpy as np
import pytest
from pydantic import ValidationError

from gradient_gate.core import GateConfig
from gradient_gate.errors import DimensionMismatchError, SingularityError, UnknownFieldError
from gradient_gate.landscapes import (
    BUILTIN_NAMES,
    PATH_A,
    PATH_B,
    Path,
    ScalarField,
    TrajectoryRecord,
    VectorField,
    builtin_field,
    convergence_time,
    descend,
    descend_many,
    gradient_field,
    line_integral,
    merged_field,
    sample_inits,
    sum_field,
    summarize,
)
from gradient_gate.seeding import make_rng
from gradient_gate.tools import central_difference, relative_error

SCALAR_NAMES = [name for name in BUILTIN_NAMES if name != "V"]


def _smooth_points(field: ScalarField, rng: np.random.Generator, n: int = 100) -> np.ndarray:
    low, high = (-20.0, 20.0) if field.arity == 1 else (-3.0, 3.0)
    points = []
    while len(points) < n:
        p = rng.uniform(low, high, size=field.arity)
        if field.is_nonsmooth(p) or abs(p[0]) < 1e-3:
            continue
        points.append(p)
    return np.array(points)


def test_builtin_examples():
    """Spot values of the builtin losses and the swirl field."""
    assert builtin_field("L1").value(np.array([1.0, 1.0])) == 2.0
    assert builtin_field("L2").value(np.array([0.0, 0.0])) == 0.0
    assert builtin_field("L2").value(np.array([1e-12, 0.0])) == pytest.approx(0.0, abs=1e-20)
    np.testing.assert_allclose(builtin_field("L2").grad(np.array([1.0, 0.0])), [4.0 * np.exp(-2.0), 0.0])
    np.testing.assert_allclose(builtin_field("V")(np.array([1.0, 0.0])), [-2.0, 1.0])
    assert builtin_field("L3").value(np.array([1.0, 1.0])) == 0.0
    assert builtin_field("L4").value(np.array([2.0, 0.5])) == 0.0


def test_l2_uses_quadratic_branch_on_axis():
    """On theta1 = 0 the quadratic branch applies."""
    l2 = builtin_field("L2")
    assert l2.value(np.array([0.0, 2.0])) == 4.0
    np.testing.assert_array_equal(l2.grad(np.array([0.0, 2.0])), [0.0, 4.0])


def test_prop3_losses():
    """The auxiliary loss is a*theta1 inside the closed box [1,2]x[0,1] and 0 outside."""
    main = builtin_field("prop3_main", 2.0)
    aux = builtin_field("prop3_aux(2.0)")
    points = np.array([[1.5, 0.5], [1.0, 0.0], [2.0, 1.0], [0.5, 0.5], [1.5, 1.5]])
    np.testing.assert_array_equal(main.value(points), 2.0 * points[:, 0])
    np.testing.assert_array_equal(aux.value(points), [3.0, 2.0, 4.0, 0.0, 0.0])


def test_unknown_builtin():
    """Unknown names raise an error listing the valid ones."""
    with pytest.raises(UnknownFieldError, match="L5"):
        builtin_field("L5")


@pytest.mark.parametrize("name", SCALAR_NAMES)
def test_builtin_gradients_match_finite_differences(name):
    """Analytic gradients agree with central differences at 100 smooth points."""
    field = builtin_field(name, 1.7) if name.startswith("prop3") else builtin_field(name)
    points = _smooth_points(field, make_rng(5, len(name)))
    for p in points:
        numeric = central_difference(lambda x, f=field: float(f.value(x)), p, h=1e-6)
        assert relative_error(field.grad(p), numeric) < 1e-5


def test_vector_field_raises_at_singularity():
    """The swirl field is undefined at the origin."""
    v = builtin_field("V")
    assert isinstance(v, VectorField)
    assert v.is_singular(np.array([[0.0, 0.0], [1.0, 0.0]])).tolist() == [True, False]
    with pytest.raises(SingularityError):
        v(np.array([0.0, 0.0]))


# ---------------------------------------------------------------------------
# merged fields


def test_merged_identical_aux_doubles_gradient(rng):
    """An auxiliary identical to the main loss is fully accepted."""
    l1 = builtin_field("L1")
    field = merged_field(l1, builtin_field("L1"), GateConfig.weighted())
    points = rng.uniform(-3.0, 3.0, size=(50, 2))
    np.testing.assert_array_equal(field(points), 2.0 * l1.grad(points))


def test_merged_blocks_conflicting_aux():
    """(theta-10)^2 with aux theta^2 at theta=5: the aux gradient is dropped."""
    field = merged_field(builtin_field("quad1d_main"), builtin_field("quad1d_aux"), GateConfig.weighted())
    np.testing.assert_array_equal(field(np.array([5.0])), [-10.0])
    merged, cos, weight = field.evaluate(np.array([[5.0]]))
    assert cos[0] == -1.0
    assert weight[0] == 0.0


@pytest.mark.parametrize("config", [GateConfig.weighted(), GateConfig.unweighted()], ids=["weighted", "unweighted"])
def test_merged_accepts_aligned_aux(config):
    """L1 with aux L3 at (-1,-1): gradients align, so both are summed."""
    field = merged_field(builtin_field("L1"), builtin_field("L3"), config)
    np.testing.assert_allclose(field(np.array([-1.0, -1.0])), [-6.0, -6.0])


def test_merged_arity_mismatch():
    """Main and auxiliary must live in the same space."""
    with pytest.raises(DimensionMismatchError):
        merged_field(builtin_field("quad1d_main"), builtin_field("L1"), GateConfig.weighted())


def test_sum_field_is_ungated():
    """The plain sum of L1 and the swirl is a pure rotation."""
    field = sum_field(builtin_field("L1"), builtin_field("V"))
    np.testing.assert_allclose(field(np.array([2.0, 0.0])), [0.0, 0.5])


# ---------------------------------------------------------------------------
# descent


def test_convergence_time_examples():
    """First index strictly below the level, or None."""

    def record(losses):
        n = len(losses)
        return TrajectoryRecord(
            points=np.zeros((n, 2)), main_loss=np.array(losses), cos=np.full(n, np.nan), weight=np.full(n, np.nan)
        )

    assert convergence_time(record([1.0, 0.5, 0.09, 0.5])) == 2
    assert convergence_time(record([1.0, 0.1, 0.2])) is None
    losses = np.linspace(2.0, 0.0, 30)
    assert convergence_time(record(losses)) == next(i for i, v in enumerate(losses) if v < 0.1)


def test_descend_l1_gradient():
    """Plain gradient descent on L1 from (2, 2) contracts by 0.98 per step."""
    l1 = builtin_field("L1")
    traj = descend(gradient_field(l1), [2.0, 2.0], l1)
    assert len(traj.points) == len(traj.main_loss) == 601
    assert np.all(np.diff(traj.main_loss) < 0.0)
    assert traj.convergence_step == 109
    assert not traj.diverged
    assert np.all(np.isnan(traj.cos))


def test_descend_ungated_swirl_never_converges():
    """Adding the swirl field to the L1 gradient only rotates the iterate."""
    l1 = builtin_field("L1")
    traj = descend(sum_field(l1, builtin_field("V")), [1.0, 1.0], l1)
    assert traj.convergence_step is None
    assert np.all(traj.main_loss >= 2.0 - 1e-12)


def test_descend_gated_swirl_matches_main_only():
    """The swirl always conflicts with the L1 gradient, so the gate drops it."""
    l1 = builtin_field("L1")
    inits = sample_inits(make_rng(0, 1), 100)
    gated = descend_many(merged_field(l1, builtin_field("V"), GateConfig.unweighted()), inits, l1)
    plain = descend_many(gradient_field(l1), inits, l1)
    assert all(g.convergence_step is not None for g in gated)
    assert all(g.convergence_step <= p.convergence_step for g, p in zip(gated, plain))
    assert all(np.all(r.weight[:-1] == 0.0) for r in gated)


@pytest.mark.parametrize("config", [GateConfig.weighted(), GateConfig.unweighted()], ids=["weighted", "unweighted"])
@pytest.mark.parametrize("aux", ["L3", "V", "L4"])
def test_gated_steps_are_descent_directions(config, aux):
    """Every step of a gated trajectory has non-negative inner product with the main gradient."""
    main = builtin_field("L2") if aux == "L4" else builtin_field("L1")
    field = merged_field(main, builtin_field(aux), config)
    for traj in descend_many(field, sample_inits(make_rng(3, 1), 20), main, steps=200):
        points = traj.points[:-1]
        inner = np.einsum("ij,ij->i", field(points), main.grad(points))
        assert np.all(inner >= -1e-12)


def test_descend_records_divergence_without_raising():
    """Too large a step diverges; the run stops early and is flagged."""
    l1 = builtin_field("L1")
    traj = descend(gradient_field(l1), [2.0, 2.0], l1, alpha=1.5)
    assert traj.diverged
    assert traj.convergence_step is None
    assert len(traj) < 601
    assert traj.main_loss[-1] > 1e6


def test_descend_stops_at_singularity():
    """A run starting on a singular point is flagged after its first point."""
    l1 = builtin_field("L1")
    traj = descend(sum_field(l1, builtin_field("V")), [0.0, 0.0], l1)
    assert traj.diverged
    assert len(traj) == 1


def test_descend_validates_inputs():
    """Steps must be positive and inits finite."""
    l1 = builtin_field("L1")
    with pytest.raises(ValueError, match="steps"):
        descend(gradient_field(l1), [1.0, 1.0], l1, steps=0)
    with pytest.raises(ValueError, match="finite"):
        descend(gradient_field(l1), [np.nan, 1.0], l1)


def test_sample_inits_respects_box_and_radius():
    """Inits lie in the box and away from the origin, reproducibly."""
    inits = sample_inits(make_rng(0, 1), 500, box=((-3.0, -0.5), (-3.0, 3.0)), min_radius=0.5)
    assert inits.shape == (500, 2)
    assert np.all((inits[:, 0] >= -3.0) & (inits[:, 0] <= -0.5))
    assert np.all(np.hypot(inits[:, 0], inits[:, 1]) >= 0.5)
    np.testing.assert_array_equal(inits, sample_inits(make_rng(0, 1), 500, box=((-3.0, -0.5), (-3.0, 3.0))))


def test_summarize_counts():
    """Summary statistics over a batch of runs."""
    l1 = builtin_field("L1")
    records = descend_many(gradient_field(l1), [[2.0, 2.0], [0.1, 0.1]], l1)
    stats = summarize(records)
    assert stats["runs"] == 2
    assert stats["converged"] == 2
    assert stats["diverged"] == 0
    assert stats["median_convergence_time"] == pytest.approx((109 + 0) / 2)


# ---------------------------------------------------------------------------
# path integrals


@pytest.mark.parametrize("config", [GateConfig.weighted(), GateConfig.unweighted()], ids=["weighted", "unweighted"])
@pytest.mark.parametrize("a", [1.0, 2.5, -1.0])
def test_gated_field_is_not_conservative(config, a):
    """The gated field integrates to 2a along path A and 3a along path B."""
    field = merged_field(builtin_field("prop3_main", a), builtin_field("prop3_aux", a), config)
    assert line_integral(field, PATH_A) == pytest.approx(2.0 * a, abs=1e-6)
    assert line_integral(field, PATH_B) == pytest.approx(3.0 * a, abs=1e-6)


def test_gradient_field_is_path_independent():
    """A conservative field gives the same integral along both paths."""
    l1 = builtin_field("L1")
    integral_a = line_integral(l1, PATH_A)
    integral_b = line_integral(gradient_field(l1), PATH_B)
    assert abs(integral_a - integral_b) < 1e-6
    assert integral_a == pytest.approx(8.0, abs=1e-9)


def test_line_integral_requires_resolution():
    """Fewer than 1000 points per segment is rejected."""
    with pytest.raises(ValueError, match="1000"):
        line_integral(builtin_field("L1"), PATH_A, n_per_segment=999)


def test_line_integral_through_singularity():
    """A path through the origin hits the swirl singularity."""
    path = Path.through([(-1.0, 0.0), (1.0, 0.0)])
    with pytest.raises(SingularityError):
        line_integral(builtin_field("V"), path, n_per_segment=1001)


def test_path_segments_must_connect():
    """Disconnected segments are rejected."""
    with pytest.raises(ValidationError, match="not connected"):
        Path(segments=[{"start": (0, 0), "end": (1, 0)}, {"start": (2, 0), "end": (3, 0)}])
