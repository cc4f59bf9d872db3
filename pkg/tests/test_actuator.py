import numpy as np
import pytest
from hypothesis import given, strategies as st

from amsalloc.actuator_sim import (SYNTH, ActuatorBank, ActuatorParams, ActuatorState,
                                   ManeuverSample, ResolutionError, actuator_step,
                                   load_maneuver_csv, run_experiment, save_maneuver_csv,
                                   synth_maneuver, validate_maneuver)
from amsalloc.polytope import contains

from oracles import overshoot, second_order_step

TAIL = dict(omega0=30.74, zeta=0.509)


def step_trace(params, command, seconds, dt, saturate=True):
    bank = ActuatorBank([params], saturate=saturate)
    n = int(round(seconds / dt))
    trace = np.empty((n, 1))
    bank.advance(np.array([command]), n, dt, trace)
    return trace[:, 0]


def test_params_validation():
    with pytest.raises(ValueError):
        ActuatorParams(omega0=0.0, zeta=0.5)
    with pytest.raises(ValueError):
        ActuatorParams(omega0=1.0, zeta=-0.1)
    with pytest.raises(ValueError):
        ActuatorParams(omega0=1.0, zeta=0.5, position_limits=(1.0, 1.0))
    with pytest.raises(ValueError):
        ActuatorParams(omega0=1.0, zeta=0.5, rate_limit=0.0)


def test_zero_command_keeps_rest():
    s = actuator_step(ActuatorState(), ActuatorParams(**TAIL), 0.0, 1e-3)
    assert s == ActuatorState(0.0, 0.0)


def test_dt_guard():
    p = ActuatorParams(**TAIL)
    with pytest.raises(ResolutionError):
        actuator_step(ActuatorState(), p, 1.0, 1.0 / (10.0 * 30.74) * 1.01)
    with pytest.raises(ResolutionError):
        actuator_step(ActuatorState(), p, 1.0, 0.0)
    actuator_step(ActuatorState(), p, 1.0, 1.0 / (10.0 * 30.74))


def test_tail_step_overshoot():
    y = step_trace(ActuatorParams(**TAIL), 1.0, 1.0, 1e-3, saturate=False)
    expected = overshoot(TAIL["zeta"])
    assert expected == pytest.approx(0.156, abs=5e-4)
    assert abs((y.max() - 1.0) - expected) <= 0.01 * expected


def test_linear_regime_matches_analytic():
    dt = 1e-4
    y = step_trace(ActuatorParams(**TAIL), 1.0, 0.5, dt, saturate=False)
    t = dt * np.arange(1, y.size + 1)
    ref = second_order_step(t, TAIL["omega0"], TAIL["zeta"])
    assert np.abs(y - ref).max() <= 1e-4 * np.abs(ref).max()


def test_rate_limit_holds_step_velocity():
    p = ActuatorParams(**TAIL, position_limits=(-24.0, 10.5), rate_limit=40.0)
    dt = 1e-3
    y = step_trace(p, 10.0, 1.0, dt)
    v = np.diff(np.concatenate([[0.0], y])) / dt
    assert np.abs(v).max() <= 40.0 * 1.01
    assert np.abs(v).max() >= 40.0 * 0.99


def test_position_clamp_and_anti_windup():
    p = ActuatorParams(**TAIL, position_limits=(-24.0, 10.5), rate_limit=40.0)
    bank = ActuatorBank([p])
    excess, events = bank.advance(np.array([10.5]), 2000, 1e-3)
    assert events[0] > 0 and excess[0] > 0.0      # overshoot caught by the clamp
    assert bank.position[0] == 10.5
    assert bank.velocity[0] <= 0.0


@given(st.floats(-60.0, 60.0), st.floats(-30.0, 30.0), st.floats(-200.0, 200.0),
       st.sampled_from([1e-3, 5e-4]))
def test_saturation_hard_bounds(command, start, v0, dt):
    p = ActuatorParams(**TAIL, position_limits=(-24.0, 10.5), rate_limit=40.0)
    bank = ActuatorBank([p])
    bank.position[:] = min(max(start, -24.0), 10.5)
    bank.velocity[:] = v0
    x0 = bank.position[0]
    trace = np.empty((300, 1))
    bank.advance(np.array([command]), 300, dt, trace)
    y = np.concatenate([[x0], trace[:, 0]])
    assert y.min() >= -24.0 and y.max() <= 10.5
    assert np.abs(np.diff(y)).max() <= 40.0 * dt * 1.01
    assert abs(bank.velocity[0]) <= 40.0


def test_bank_is_deterministic(actuators):
    cmd = np.array([10.0, -20.0, 40.0, -5.0, 30.0, -20.0, 25.0])
    runs = []
    for _ in range(2):
        bank = ActuatorBank(actuators)
        trace = np.empty((500, 7))
        out = bank.advance(cmd, 500, 1e-3, trace)
        runs.append((trace, *out))
    for a, b in zip(*runs):
        assert np.array_equal(a, b)


def test_bank_matches_single_steps(actuators):
    cmd = np.array([5.0, -3.0, 10.0, 2.0, -15.0, 8.0, 12.0])
    bank = ActuatorBank(actuators)
    bank.advance(cmd, 50, 1e-3)
    for j, p in enumerate(actuators):
        s = ActuatorState()
        for _ in range(50):
            s = actuator_step(s, p, cmd[j], 1e-3)
        assert s.position == pytest.approx(bank.position[j], abs=1e-12)


# ---------------------------------------------------------------------------
# maneuver
# ---------------------------------------------------------------------------


def test_synth_maneuver_examples(position_ams):
    man = synth_maneuver()
    assert len(man) == 501
    first, last = man[0], man[-1]
    assert first.t == 0.0 and first.tau_cmd[0] == 0.0
    assert first.tau_cmd[1] < 0.0
    at2 = next(s for s in man if s.t == 2.0)
    assert at2.tau_cmd[0] > 0.0
    assert not contains(position_ams[1], at2.tau_cmd)
    assert last.t == 5.0
    assert last.tau_cmd[0] == first.tau_cmd[0]
    assert last.tau_cmd[1] == first.tau_cmd[1]
    assert last.tau_cmd[2] == -first.tau_cmd[2] != 0.0


def test_synth_maneuver_shape():
    man = synth_maneuver()
    t = np.array([s.t for s in man])
    tau = np.array([s.tau_cmd for s in man])
    roll = tau[:, 0]
    assert np.all(roll[(t <= 0.5) | (t >= 3.5)] == 0.0)
    assert np.all(roll[(t > 0.5) & (t < 3.5)] > 0.0)
    assert roll.max() == SYNTH["cl_peak"]
    dip = np.abs(tau[:, 1])
    assert np.all(dip[(t > 1.0) & (t < 4.0)] < abs(SYNTH["cm_trim"]))
    assert np.all(np.diff(t) > 0.0)
    assert synth_maneuver() == man


def test_synth_maneuver_rejects_bad_duration():
    with pytest.raises(ValueError):
        synth_maneuver(0.0)


def test_maneuver_validation():
    with pytest.raises(ValueError):
        validate_maneuver([])
    with pytest.raises(ValueError):
        validate_maneuver([ManeuverSample(0.0, (0, 0, 0)), ManeuverSample(0.0, (0, 0, 0))])


def test_maneuver_csv_round_trip(tmp_path):
    man = synth_maneuver(2.0, 50.0)
    path = tmp_path / "m.csv"
    save_maneuver_csv(man, path)
    assert load_maneuver_csv(path) == man


def test_maneuver_csv_missing_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t,cl,cm\n0,0,0\n")
    with pytest.raises(ValueError, match="cn"):
        load_maneuver_csv(path)


# ---------------------------------------------------------------------------
# closed chain
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def position_run(model, actuators):
    return run_experiment(model, actuators, synth_maneuver(), "position_only")


@pytest.fixture(scope="module")
def rate_run(model, actuators):
    return run_experiment(model, actuators, synth_maneuver(), "rate_exact")


def test_constant_command_settles(model, actuators):
    tau = (0.01, -0.05, 0.002)
    man = [ManeuverSample(k / 100.0, tau) for k in range(301)]
    ts = run_experiment(model, actuators, man, "position_only")
    # first allocation is the trimmed start; perturb by replaying from rest
    assert np.abs(ts.tau_realized[-1] - np.array(tau)).max() <= 1e-6
    bank = ActuatorBank(actuators)
    bank.advance(ts.u[-1], 3000, 1e-3)
    assert np.abs(model.B @ bank.position - np.array(tau)).max() <= 1e-6


def test_experiment_records(position_run, model):
    ts = position_run
    n = len(synth_maneuver())
    assert ts.u.shape == ts.u_act.shape == (n, 7)
    assert np.array_equal(ts.tau_realized, ts.u_act @ model.B.T)
    assert np.all((ts.scale > 0.0) & (ts.scale <= 1.0))
    assert np.all(ts.scale[~ts.was_clipped] == 1.0)
    assert np.all(ts.solve_time > 0.0)


def test_position_only_outruns_tail_rate(position_run):
    ts = position_run
    onset = (ts.t >= 0.5) & (ts.t <= 1.0)
    rate = np.abs(np.diff(ts.u[:, 0])) / np.diff(ts.t)
    assert rate[onset[:-1]].max() > 40.0


def test_position_only_hits_clamp(position_run):
    assert position_run.clamp_events.sum() >= 1
    assert position_run.clamp_excess.max() > 0.0


def test_rate_mode_keeps_limits_and_is_smoother(position_run, rate_run, model):
    lim = model.position_limits
    assert rate_run.max_position_violation(lim.lower, lim.upper) <= 1e-6
    assert rate_run.total_variation() < position_run.total_variation()
    # commanded rate of the rate-constrained allocation respects the rate box
    u_dot = rate_run.u @ model.A.T
    assert np.all(u_dot <= model.rate_limits.upper + 1e-9)
    assert np.all(u_dot >= model.rate_limits.lower - 1e-9)


@pytest.mark.xfail(strict=True, reason="the imposed rate model bounds A u, not the change of u "
                   "between samples; the aileron command jumps up to 13 deg per 10 ms and the "
                   "surface lags by about half its range")
def test_rate_mode_tracking_within_five_percent(rate_run, model):
    span = model.position_limits.upper - model.position_limits.lower
    assert np.all(rate_run.tracking_error() <= 0.05 * span)


def test_experiment_is_deterministic(model, actuators):
    man = synth_maneuver(1.5)
    a = run_experiment(model, actuators, man, "rate_exact", clock=lambda: 0.0)
    b = run_experiment(model, actuators, man, "rate_exact", clock=lambda: 0.0)
    for name in ("u", "u_act", "tau_realized", "scale", "was_clipped", "clamp_events",
                 "clamp_excess"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_experiment_custom_allocator(model, actuators):
    from amsalloc.baseline import erpi_allocate

    def erpi(tau):
        return erpi_allocate(model, tau).u

    ts = run_experiment(model, actuators, synth_maneuver(1.0), allocate_fn=erpi)
    assert ts.mode == "erpi"
    assert np.all(ts.u >= model.position_limits.lower - 1e-12)


def test_experiment_argument_errors(model, actuators):
    with pytest.raises(ValueError):
        run_experiment(model, actuators[:6], synth_maneuver(1.0), "position_only")
    with pytest.raises(ValueError):
        run_experiment(model, actuators, [], "position_only")
