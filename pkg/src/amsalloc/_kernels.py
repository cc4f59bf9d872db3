"""Hot inner loops, each in a numba flavour and a pure-numpy flavour.

The public names at the bottom dispatch on :data:`amsalloc._accel.USE_NUMBA`.
Both flavours implement the same arithmetic in the same order, so they agree
to rounding; tests compare them directly.
"""
from __future__ import annotations

import math

import numpy as np

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# Second-order actuator bank, fixed-step RK4 with rate/position saturation
# ---------------------------------------------------------------------------


@njit(cache=True)
def _bank_integrate_nb(pos, vel, cmd, omega, zeta, lower, upper, rate, dt,
                       n_steps, trace):
    m = pos.shape[0]
    excess = np.zeros(m)
    events = np.zeros(m, dtype=np.int64)
    record = trace.shape[0] >= n_steps
    h2 = 0.5 * dt
    for k in range(n_steps):
        for j in range(m):
            w = omega[j]
            w2 = w * w
            c2 = 2.0 * zeta[j] * w
            u = cmd[j]
            x = pos[j]
            v = vel[j]

            k1x = v
            k1v = w2 * (u - x) - c2 * v
            k2x = v + h2 * k1v
            k2v = w2 * (u - (x + h2 * k1x)) - c2 * k2x
            k3x = v + h2 * k2v
            k3v = w2 * (u - (x + h2 * k2x)) - c2 * k3x
            k4x = v + dt * k3v
            k4v = w2 * (u - (x + dt * k3x)) - c2 * k4x
            xn = x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            vn = v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)

            r = rate[j]
            step = r * dt
            if xn - x > step:
                xn = x + step
            elif xn - x < -step:
                xn = x - step
            if vn > r:
                vn = r
            elif vn < -r:
                vn = -r

            if xn > upper[j]:
                over = xn - upper[j]
                if over > excess[j]:
                    excess[j] = over
                events[j] += 1
                xn = upper[j]
                if vn > 0.0:
                    vn = 0.0
            elif xn < lower[j]:
                over = lower[j] - xn
                if over > excess[j]:
                    excess[j] = over
                events[j] += 1
                xn = lower[j]
                if vn < 0.0:
                    vn = 0.0

            pos[j] = xn
            vel[j] = vn
            if record:
                trace[k, j] = xn
    return excess, events


def _bank_integrate_np(pos, vel, cmd, omega, zeta, lower, upper, rate, dt,
                       n_steps, trace):
    m = pos.shape[0]
    excess = np.zeros(m)
    events = np.zeros(m, dtype=np.int64)
    record = trace.shape[0] >= n_steps
    h2 = 0.5 * dt
    w2 = omega * omega
    c2 = 2.0 * zeta * omega
    step = rate * dt
    x = pos.copy()
    v = vel.copy()
    for k in range(n_steps):
        k1x = v
        k1v = w2 * (cmd - x) - c2 * v
        k2x = v + h2 * k1v
        k2v = w2 * (cmd - (x + h2 * k1x)) - c2 * k2x
        k3x = v + h2 * k2v
        k3v = w2 * (cmd - (x + h2 * k2x)) - c2 * k3x
        k4x = v + dt * k3v
        k4v = w2 * (cmd - (x + dt * k3x)) - c2 * k4x
        xn = x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        vn = v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)

        xn = x + np.clip(xn - x, -step, step)
        vn = np.clip(vn, -rate, rate)

        hi = xn > upper
        lo = xn < lower
        over = np.where(hi, xn - upper, np.where(lo, lower - xn, 0.0))
        np.maximum(excess, over, out=excess)
        events += hi | lo
        xn = np.where(hi, upper, np.where(lo, lower, xn))
        vn = np.where((hi & (vn > 0.0)) | (lo & (vn < 0.0)), 0.0, vn)

        x = xn
        v = vn
        if record:
            trace[k] = x
    pos[:] = x
    vel[:] = v
    return excess, events


# ---------------------------------------------------------------------------
# Ray clipping of many commands against N tau <= 1
# ---------------------------------------------------------------------------


@njit(cache=True)
def _clip_batch_nb(N, taus, tol):
    n = taus.shape[0]
    k = N.shape[0]
    scales = np.ones(n)
    clipped = np.zeros(n, dtype=np.bool_)
    proj = np.empty(k)
    for i in range(n):
        t0 = taus[i, 0]
        t1 = taus[i, 1]
        t2 = taus[i, 2]
        mx = -math.inf
        for r in range(k):
            p = N[r, 0] * t0 + N[r, 1] * t1 + N[r, 2] * t2
            proj[r] = p
            if p > mx:
                mx = p
        if mx <= 1.0 + tol:
            continue
        best = -1.0
        for r in range(k):
            p = proj[r]
            if p <= 0.0:
                continue
            s = 1.0 / p
            # candidate s*tau is admissible iff s * max(N tau) <= 1 + tol
            if s * mx <= 1.0 + tol and s > best:
                best = s
        scales[i] = best
        clipped[i] = True
    return scales, clipped


def _clip_batch_np(N, taus, tol):
    proj = taus @ N.T
    mx = proj.max(axis=1)
    clipped = mx > 1.0 + tol
    with np.errstate(divide="ignore"):
        s = np.where(proj > 0.0, 1.0 / np.where(proj > 0.0, proj, 1.0), -np.inf)
    admissible = s * mx[:, None] <= 1.0 + tol
    s = np.where(admissible, s, -np.inf)
    best = s.max(axis=1)
    scales = np.where(clipped, best, 1.0)
    return scales, clipped


if USE_NUMBA:
    bank_integrate = _bank_integrate_nb
    clip_batch = _clip_batch_nb
else:
    bank_integrate = _bank_integrate_np
    clip_batch = _clip_batch_np

# bank_integrate(pos, vel, cmd, omega, zeta, lower, upper, rate, dt, n_steps, trace)
#   advances in place; returns (max pre-clamp overshoot, clamp-step count) per
#   channel. trace with >= n_steps rows receives every position.
# clip_batch(N, taus, tol) -> (scale, was_clipped) per command row.
