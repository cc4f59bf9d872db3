"""Saturating second-order actuators and maneuver replay through an allocator."""
from __future__ import annotations

import csv
import math
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels
from .allocator import AircraftModel, Allocator, Mode

DEFAULT_DT = 1e-3


class ResolutionError(ValueError):
    pass


@dataclass(frozen=True)
class ActuatorParams:
    omega0: float                      # rad/s
    zeta: float
    position_limits: tuple[float, float] = (-math.inf, math.inf)   # deg
    rate_limit: float = math.inf       # deg/s, symmetric

    def __post_init__(self):
        if not self.omega0 > 0.0:
            raise ValueError(f"omega0 must be > 0, got {self.omega0}")
        if not self.zeta > 0.0:
            raise ValueError(f"zeta must be > 0, got {self.zeta}")
        lo, hi = self.position_limits
        if not lo < hi:
            raise ValueError(f"position limits must satisfy lower < upper, got {self.position_limits}")
        if not self.rate_limit > 0.0:
            raise ValueError(f"rate limit must be > 0, got {self.rate_limit}")


@dataclass
class ActuatorState:
    position: float = 0.0              # deg
    velocity: float = 0.0              # deg/s


def check_dt(dt: float, omega0: float) -> None:
    if not dt > 0.0:
        raise ResolutionError(f"dt must be > 0, got {dt}")
    if dt > 1.0 / (10.0 * omega0) * (1.0 + 1e-12):
        raise ResolutionError(
            f"dt={dt} s is too coarse for omega0={omega0} rad/s (needs dt <= {1.0 / (10.0 * omega0):.3g} s)")


def actuator_step(state: ActuatorState, params: ActuatorParams, command: float,
                  dt: float) -> ActuatorState:
    """One RK4 step of ``x'' = w0^2 (cmd - x) - 2 zeta w0 x'`` with saturation.

    The position increment is limited to ``rate_limit * dt`` and the velocity
    to ``+-rate_limit``; a position clamp zeroes velocity pushing outwards.
    """
    check_dt(dt, params.omega0)
    pos = np.array([state.position], dtype=float)
    vel = np.array([state.velocity], dtype=float)
    lo, hi = params.position_limits
    _kernels.bank_integrate(pos, vel, np.array([float(command)]),
                            np.array([params.omega0]), np.array([params.zeta]),
                            np.array([float(lo)]), np.array([float(hi)]),
                            np.array([float(params.rate_limit)]), float(dt), 1,
                            np.empty((0, 1)))
    return ActuatorState(float(pos[0]), float(vel[0]))


class ActuatorBank:
    """Vectorised state for ``m`` independent actuator channels."""

    def __init__(self, params: Sequence[ActuatorParams], saturate: bool = True):
        self.params = list(params)
        self.omega = np.array([p.omega0 for p in params], dtype=float)
        self.zeta = np.array([p.zeta for p in params], dtype=float)
        if saturate:
            self.lower = np.array([p.position_limits[0] for p in params], dtype=float)
            self.upper = np.array([p.position_limits[1] for p in params], dtype=float)
            self.rate = np.array([p.rate_limit for p in params], dtype=float)
        else:
            self.lower = np.full(len(params), -np.inf)
            self.upper = np.full(len(params), np.inf)
            self.rate = np.full(len(params), np.inf)
        self.position = np.zeros(len(params))
        self.velocity = np.zeros(len(params))

    @property
    def m(self) -> int:
        return len(self.params)

    def reset(self, position=None) -> None:
        self.position = np.zeros(self.m) if position is None else np.array(position, dtype=float)
        self.velocity = np.zeros(self.m)

    def advance(self, command, n_steps: int, dt: float, trace: Optional[np.ndarray] = None):
        """Hold ``command`` for ``n_steps`` steps; returns (excess, clamp events)."""
        check_dt(dt, float(self.omega.max()))
        cmd = np.ascontiguousarray(command, dtype=float)
        buf = np.empty((0, self.m)) if trace is None else trace
        return _kernels.bank_integrate(self.position, self.velocity, cmd, self.omega,
                                       self.zeta, self.lower, self.upper, self.rate,
                                       float(dt), int(n_steps), buf)


# ---------------------------------------------------------------------------
# maneuvers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ManeuverSample:
    t: float
    tau_cmd: tuple[float, float, float]


# Synthetic maneuver constants. Trim moments of the two level turns, a right
# roll pulse over 0.5 s < t < 3.5 s with 0.3 s raised-cosine edges whose peak
# sits 1.3x beyond the position-limited AMS, and a load-factor dip over
# 1 s < t < 4 s. The trim keeps every surface off its limits.
SYNTH = {
    "cm_trim": -0.10,
    "cn_trim": 0.002,
    "cl_peak": 0.1220,
    "roll_window": (0.5, 3.5),
    "roll_ramp": 0.3,
    "dip_window": (1.0, 4.0),
    "dip_depth": 0.4,
    "yaw_window": (0.5, 3.5),
}


def _bump(t: float, window: tuple[float, float]) -> float:
    a, b = window
    if t <= a or t >= b:
        return 0.0
    return math.sin(math.pi * (t - a) / (b - a)) ** 2


def _pulse(t: float, window: tuple[float, float], ramp: float) -> float:
    """Plateau of height 1 on ``window`` with raised-cosine edges of length ``ramp``."""
    a, b = window
    if t <= a or t >= b:
        return 0.0
    edge = min(t - a, b - t)
    if edge >= ramp:
        return 1.0
    return math.sin(0.5 * math.pi * edge / ramp) ** 2


def _smoothstep(t: float, window: tuple[float, float]) -> float:
    a, b = window
    if t <= a:
        return 0.0
    if t >= b:
        return 1.0
    s = (t - a) / (b - a)
    return s * s * (3.0 - 2.0 * s)


def synth_tau(t: float) -> tuple[float, float, float]:
    c = SYNTH
    cl = c["cl_peak"] * _pulse(t, c["roll_window"], c["roll_ramp"])
    cm = c["cm_trim"] * (1.0 - c["dip_depth"] * _bump(t, c["dip_window"]))
    cn = c["cn_trim"] * (2.0 * _smoothstep(t, c["yaw_window"]) - 1.0)
    return (cl, cm, cn)


def synth_maneuver(duration: float = 5.0, rate: float = 100.0) -> list[ManeuverSample]:
    """Left turn, aggressive right roll, right turn; deterministic."""
    if not duration > 0.0:
        raise ValueError(f"duration must be > 0, got {duration}")
    n = int(round(duration * rate))
    return [ManeuverSample(k / rate, synth_tau(k / rate)) for k in range(n + 1)]


def maneuver_arrays(maneuver: Sequence[ManeuverSample]) -> tuple[np.ndarray, np.ndarray]:
    t = np.array([s.t for s in maneuver], dtype=float)
    tau = np.array([s.tau_cmd for s in maneuver], dtype=float).reshape(-1, 3)
    return t, tau


def validate_maneuver(maneuver: Sequence[ManeuverSample]) -> None:
    if not maneuver:
        raise ValueError("maneuver is empty")
    t, _ = maneuver_arrays(maneuver)
    if np.any(np.diff(t) <= 0.0):
        raise ValueError("maneuver sample times must be strictly increasing")


def load_maneuver_csv(path: str | os.PathLike) -> list[ManeuverSample]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"t", "cl", "cm", "cn"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: maneuver CSV lacks columns {sorted(missing)}")
        out = [ManeuverSample(float(r["t"]), (float(r["cl"]), float(r["cm"]), float(r["cn"])))
               for r in reader]
    validate_maneuver(out)
    return out


def save_maneuver_csv(maneuver: Sequence[ManeuverSample], path: str | os.PathLike) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "cl", "cm", "cn"])
        for s in maneuver:
            w.writerow([repr(float(s.t))] + [repr(float(x)) for x in s.tau_cmd])


# ---------------------------------------------------------------------------
# experiment
# ---------------------------------------------------------------------------


@dataclass
class TimeSeries:
    mode: str
    t: np.ndarray
    tau_cmd: np.ndarray
    u: np.ndarray
    u_act: np.ndarray
    tau_realized: np.ndarray
    tau_allocated: np.ndarray
    scale: np.ndarray
    was_clipped: np.ndarray
    solve_time: np.ndarray
    clamp_events: np.ndarray          # per sample interval and channel
    clamp_excess: np.ndarray          # largest pre-clamp overshoot, deg
    extra: dict = field(default_factory=dict)

    def total_variation(self) -> float:
        """Sum over channels of the total variation of the commanded ``u``."""
        return float(np.abs(np.diff(self.u, axis=0)).sum())

    def max_position_violation(self, lower, upper) -> float:
        over = np.maximum(self.u_act - np.asarray(upper), np.asarray(lower) - self.u_act)
        return float(max(over.max(initial=0.0), 0.0))

    def tracking_error(self) -> np.ndarray:
        return np.abs(self.u_act - self.u).max(axis=0)


def run_experiment(model: AircraftModel, actuators: Sequence[ActuatorParams],
                   maneuver: Sequence[ManeuverSample], allocator_mode: Mode | str | None = None,
                   dt: float = DEFAULT_DT, *, allocator: Optional[Allocator] = None,
                   allocate_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                   clock: Callable[[], float] = time.perf_counter) -> TimeSeries:
    """Replay ``maneuver`` through allocation and the actuator bank.

    At each sample the command is allocated and held until the next sample
    while the actuators integrate at ``dt``. The bank starts at rest at the
    first allocated deflection (trimmed start). ``u_act`` rows are the
    actuator positions at the sample instants; clamp statistics cover the
    interval following each sample.
    """
    validate_maneuver(maneuver)
    if len(actuators) != model.m:
        raise ValueError(f"{len(actuators)} actuators given for a {model.m}-input model")
    if allocate_fn is None:
        alloc = allocator if allocator is not None else Allocator(model, allocator_mode)
        mode_name = str(alloc.mode)
    else:
        alloc = None
        mode_name = getattr(allocate_fn, "__name__", "custom")
    t, taus = maneuver_arrays(maneuver)
    n, m = t.size, model.m
    bank = ActuatorBank(actuators)

    u = np.zeros((n, m))
    u_act = np.zeros((n, m))
    scale = np.ones(n)
    clipped = np.zeros(n, dtype=bool)
    solve = np.zeros(n)
    events = np.zeros((n, m), dtype=np.int64)
    excess = np.zeros((n, m))

    for k in range(n):
        t0 = clock()
        if alloc is not None:
            res = alloc.allocate(taus[k])
            u[k] = res.u
            scale[k] = res.scale
            clipped[k] = res.was_clipped
        else:
            u[k] = allocate_fn(taus[k])
        solve[k] = clock() - t0
        if k == 0:
            bank.reset(u[0])
        u_act[k] = bank.position
        if k + 1 < n:
            steps = int(round((t[k + 1] - t[k]) / dt))
            if steps > 0:
                ex, ev = bank.advance(u[k], steps, dt)
                excess[k] = ex
                events[k] = ev

    return TimeSeries(
        mode=mode_name, t=t, tau_cmd=taus, u=u, u_act=u_act,
        tau_realized=u_act @ model.B.T, tau_allocated=u @ model.B.T,
        scale=scale, was_clipped=clipped, solve_time=solve,
        clamp_events=events, clamp_excess=excess,
    )
