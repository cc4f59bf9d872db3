import numpy as np
import pytest
from hypothesis import given, strategies as st

from amsalloc.allocator import AircraftModel, allocate
from amsalloc.baseline import RankDeficientError, erpi_allocate, pseudo_inverse_allocate
from amsalloc.polytope import BoxLimits

from oracles import min_norm


def test_pi_two_inputs():
    assert np.allclose(pseudo_inverse_allocate([[1.0, 1.0]], [1.0]), [0.5, 0.5], atol=1e-15)


def test_pi_zero(model):
    assert np.array_equal(pseudo_inverse_allocate(model.B, np.zeros(3)), np.zeros(7))


def test_pi_matches_normal_equations(model):
    tau = np.array([0.0, 0.05, 0.0])
    u = pseudo_inverse_allocate(model.B, tau)
    assert np.abs(u - min_norm(model.B, tau)).max() <= 1e-10
    assert np.abs(model.B @ u - tau).max() <= 1e-14


def test_pi_ignores_limits(model):
    u = pseudo_inverse_allocate(model.B, [0.0, 5.0, 0.0])
    assert np.any(u > model.position_limits.upper)


def test_rank_deficient():
    with pytest.raises(RankDeficientError):
        pseudo_inverse_allocate(np.ones((3, 4)), np.ones(3))
    # the model itself refuses a rank-deficient B, so the baseline never sees one
    with pytest.raises(ValueError):
        AircraftModel(np.vstack([np.ones(4), np.ones(4), np.arange(4.0)]),
                      BoxLimits(-np.ones(4), np.ones(4)))


def test_erpi_interior_equals_pi_and_qp(model):
    tau = np.array([0.01, -0.05, 0.002])
    r = erpi_allocate(model, tau)
    pi = pseudo_inverse_allocate(model.B, tau)
    qp = allocate(model, tau, "position_only")
    assert r.scale_applied == 1.0 and r.pi_scale == 1.0
    assert r.saturated == set()
    assert np.abs(r.u - pi).max() <= 1e-8
    assert np.abs(r.u - qp.u).max() <= 1e-8


def test_erpi_zero_command(model):
    r = erpi_allocate(model, np.zeros(3))
    assert np.array_equal(r.u, np.zeros(7))
    assert r.scale_applied == 1.0


@pytest.mark.parametrize("direction", [(0, 1, 0), (0, -1, 0), (0, 0, 1), (0.3, 0.2, -0.05)])
def test_erpi_exterior_reaches_qp_magnitude(model, direction):
    tau = np.array(direction, dtype=float)
    r = erpi_allocate(model, tau)
    achieved = model.B @ r.u
    assert np.linalg.norm(np.cross(achieved, tau)) <= 1e-9 * np.linalg.norm(tau) * np.linalg.norm(achieved)
    assert achieved @ tau > 0.0
    qp = allocate(model, tau, "position_only")
    ratio = np.linalg.norm(achieved) / np.linalg.norm(qp.tau_achieved)
    assert abs(ratio - 1.0) <= 0.01


def test_erpi_pitch_extent(model):
    # the full pitch-up extent of the position-limited set
    r = erpi_allocate(model, [0.0, 1.0, 0.0])
    assert r.scale_applied == pytest.approx(0.4521, abs=1e-12)


def test_pi_scale_is_first_step_fraction(model):
    tau = np.array([0.0, 1.0, 0.0])
    r = erpi_allocate(model, tau)
    pi = pseudo_inverse_allocate(model.B, tau)
    lo, hi = model.position_limits.lower, model.position_limits.upper
    room = np.where(pi > 0, hi / np.where(pi > 0, pi, 1.0), np.where(pi < 0, lo / np.where(pi < 0, pi, 1.0), np.inf))
    assert r.pi_scale == pytest.approx(room.min(), rel=1e-12)
    assert r.pi_scale < r.scale_applied


direction = st.tuples(*[st.floats(-1, 1, allow_nan=False)] * 3).filter(
    lambda v: np.linalg.norm(v) > 1e-3)


def random_model(seed, m):
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(3, m))
    lo = -rng.uniform(0.2, 2.0, m)
    hi = rng.uniform(0.2, 2.0, m)
    return AircraftModel(B, BoxLimits(lo, hi)), rng


@given(st.integers(0, 2**32 - 1), st.integers(3, 8), direction, st.floats(1e-3, 20.0))
def test_erpi_limits_and_direction(seed, m, d, mag):
    model, _ = random_model(seed, m)
    if np.linalg.svd(model.B, compute_uv=False)[-1] < 1e-3:
        return
    tau = mag * np.array(d)
    r = erpi_allocate(model, tau)
    lo, hi = model.position_limits.lower, model.position_limits.upper
    assert np.all(r.u >= lo - 1e-12) and np.all(r.u <= hi + 1e-12)
    achieved = model.B @ r.u
    assert np.linalg.norm(np.cross(achieved, tau)) <= 1e-8 * np.linalg.norm(tau) * np.linalg.norm(achieved)
    assert achieved @ tau >= 0.0
    assert 0.0 <= r.scale_applied <= 1.0
    assert r.iterations <= m
    assert np.allclose(achieved, r.scale_applied * tau, atol=1e-9 * np.linalg.norm(tau))


@given(st.integers(0, 2**32 - 1), direction)
def test_erpi_scale_one_iff_pi_feasible(seed, d):
    model, _ = random_model(seed, 6)
    tau = 0.5 * np.array(d)
    pi = pseudo_inverse_allocate(model.B, tau)
    lo, hi = model.position_limits.lower, model.position_limits.upper
    feasible = bool(np.all(pi >= lo) and np.all(pi <= hi))
    r = erpi_allocate(model, tau)
    assert (r.pi_scale == 1.0) == feasible
    if feasible:
        assert r.scale_applied == 1.0
        assert np.abs(r.u - pi).max() <= 1e-12
