"""Pseudo-inverse baselines: plain minimum-norm and redistributed (ERPI-style)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .allocator import AircraftModel

SATURATION_TOL = 1e-9


class RankDeficientError(ValueError):
    pass


@dataclass
class BaselineResult:
    u: np.ndarray
    saturated: set[int] = field(default_factory=set)
    scale_applied: float = 1.0
    rank_lost: bool = False
    iterations: int = 0
    pi_scale: float = 1.0        # fraction of the plain PI step that fit the box


def _check_rank(B: np.ndarray) -> None:
    if np.linalg.matrix_rank(B) < B.shape[0]:
        raise RankDeficientError(f"B has rank {np.linalg.matrix_rank(B)} < {B.shape[0]}")


def pseudo_inverse_allocate(B, tau) -> np.ndarray:
    """Minimum-norm ``u = B' (B B')^-1 tau``; limits are ignored."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    _check_rank(B)
    return B.T @ np.linalg.solve(B @ B.T, tau)


def erpi_allocate(model: AircraftModel, tau_cmd) -> BaselineResult:
    """Redistributed pseudo-inverse with direction-preserving scaling.

    Starting from ``u = 0``, the pseudo-inverse increment for the remaining
    demand is applied as far as the box allows. The actuator that stops it is
    frozen at its bound and its column removed; the remainder of the demand
    is redistributed over the free actuators. ``B u`` stays a non-negative
    multiple of ``tau_cmd`` throughout.
    """
    B = model.B
    lo, hi = model.position_limits.lower, model.position_limits.upper
    tau_cmd = np.asarray(tau_cmd, dtype=float).reshape(B.shape[0])
    _check_rank(B)
    m = B.shape[1]
    u = np.zeros(m)
    free = np.ones(m, dtype=bool)
    achieved = 0.0               # B u == achieved * tau_cmd
    saturated: set[int] = set()
    rank_lost = False
    it = 0
    pi_scale = 1.0
    if not np.any(tau_cmd):
        return BaselineResult(u, saturated, 1.0)

    while achieved < 1.0 and np.any(free):
        it += 1
        Bf = B[:, free]
        demand = (1.0 - achieved) * tau_cmd
        if np.linalg.matrix_rank(Bf) < B.shape[0]:
            # the remaining columns may still span the commanded direction
            du = np.linalg.lstsq(Bf, demand, rcond=None)[0]
            if np.linalg.norm(Bf @ du - demand) > 1e-9 * np.linalg.norm(demand):
                rank_lost = True
                break
        else:
            du = Bf.T @ np.linalg.solve(Bf @ Bf.T, demand)
        uf = u[free]
        alpha = 1.0
        stop = -1
        with np.errstate(over="ignore"):           # tiny increments give inf room
            for k, d in enumerate(du):
                if d > 0.0:
                    room = (hi[free][k] - uf[k]) / d
                elif d < 0.0:
                    room = (lo[free][k] - uf[k]) / d
                else:
                    continue
                if room < alpha:
                    alpha = max(room, 0.0)
                    stop = k
        u[free] = uf + alpha * du
        if it == 1:
            pi_scale = alpha
        achieved += alpha * (1.0 - achieved)
        if stop < 0:
            achieved = 1.0
            break
        j = int(np.flatnonzero(free)[stop])
        u[j] = hi[j] if du[stop] > 0.0 else lo[j]
        free[j] = False
        saturated.add(j)

    u = np.clip(u, lo, hi)
    for j in np.flatnonzero(free):
        if min(u[j] - lo[j], hi[j] - u[j]) <= SATURATION_TOL:
            saturated.add(int(j))
    return BaselineResult(u, saturated, float(achieved), rank_lost, it, pi_scale)
