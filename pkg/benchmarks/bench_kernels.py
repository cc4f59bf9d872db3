#!/usr/bin/env python3
"""Compare the numba kernels against their numpy fallbacks.

Both implementations are imported side by side from ``amsalloc._kernels``
regardless of ``AMSALLOC_DISABLE_NUMBA``; the flag only selects which one the
package dispatches to. Results are checked for agreement before timing.
"""
import argparse
import json
import time

import numpy as np

from amsalloc import f18
from amsalloc._accel import HAVE_NUMBA
from amsalloc._kernels import (_bank_integrate_nb, _bank_integrate_np, _clip_batch_nb,
                               _clip_batch_np)
from amsalloc.allocator import build_ams

SEED = 7


def best_of(fn, runs):
    times = []
    for _ in range(runs):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times), float(np.median(times))


def bank_case(steps):
    acts = f18.actuators()
    omega = np.array([a.omega0 for a in acts])
    zeta = np.array([a.zeta for a in acts])
    lo = np.array([a.position_limits[0] for a in acts])
    hi = np.array([a.position_limits[1] for a in acts])
    rate = np.array([a.rate_limit for a in acts])
    cmd = np.where(np.arange(7) % 2 == 0, hi + 5.0, lo - 5.0)

    def run(kernel):
        pos = np.zeros(7)
        vel = np.zeros(7)
        trace = np.empty((steps, 7))
        ex, ev = kernel(pos, vel, cmd, omega, zeta, lo, hi, rate, 1e-3, steps, trace)
        return pos, vel, trace, ex, ev

    return run


def clip_case(n):
    _, h = build_ams(f18.model(), "position_only")
    rng = np.random.default_rng(SEED)
    taus = rng.normal(size=(n, 3)) * np.array([0.1, 0.3, 0.04])
    N = np.ascontiguousarray(h.normals)
    return lambda kernel: kernel(N, taus, 1e-12)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--steps", type=int, default=20_000, help="actuator RK4 steps")
    p.add_argument("--commands", type=int, default=200_000, help="commands to clip")
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--json", action="store_true", help="print results as JSON")
    args = p.parse_args()
    if not HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")

    cases = {
        "bank_integrate": (bank_case(args.steps), _bank_integrate_nb, _bank_integrate_np),
        "clip_batch": (clip_case(args.commands), _clip_batch_nb, _clip_batch_np),
    }
    results = {}
    for name, (case, nb, npy) in cases.items():
        a, b = case(nb), case(npy)          # also triggers compilation
        for x, y in zip(a, b):
            np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-12)
        t_nb = best_of(lambda: case(nb), args.runs)
        t_np = best_of(lambda: case(npy), args.runs)
        results[name] = {"numba_s": t_nb[0], "numpy_s": t_np[0], "speedup": t_np[0] / t_nb[0]}

    if args.json:
        print(json.dumps(results, indent=2))
        return
    print(f"{'kernel':<16}{'numba [ms]':>12}{'numpy [ms]':>12}{'speed-up':>10}")
    for name, r in results.items():
        print(f"{name:<16}{r['numba_s'] * 1e3:>12.2f}{r['numpy_s'] * 1e3:>12.2f}{r['speedup']:>9.1f}x")


if __name__ == "__main__":
    main()
