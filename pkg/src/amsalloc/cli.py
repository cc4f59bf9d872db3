"""Command-line front end: AMS export, maneuver replay and timing benchmark.

Exit codes: 0 success, 2 usage or input error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import f18
from ._accel import backend
from .actuator_sim import (DEFAULT_DT, load_maneuver_csv, maneuver_arrays, run_experiment,
                           synth_maneuver)
from .allocator import (AircraftModel, Allocator, ClipConsistencyError, Mode, build_ams,
                        default_mode, position_hull, rate_hull)
from .baseline import erpi_allocate, pseudo_inverse_allocate
from .files import ModelFileError, load_model, write_series
from .polytope import DEFAULT_EPS, GeometryError, PolytopeV, write_off
from .qp import QPError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

HIST_BUCKET_S = 1e-3
AXES = ("cl", "cm", "cn")


class InputError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="amsalloc",
        description="Attainable-moment-set clipping and active-set control allocation.")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--builtin", choices=["f18"], help="use a built-in aircraft model")
    src.add_argument("--model", metavar="PATH", help="TOML model file")
    p.add_argument("--eps", type=float, default=DEFAULT_EPS,
                   help="relative geometric tolerance (default %(default)g)")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--mode", choices=[m.value for m in Mode],
                        help="AMS / constraint mode (default: rate_exact when A is diagonal)")
        sp.add_argument("--out", metavar="DIR", default=".", help="output directory")

    def maneuver(sp):
        g = sp.add_mutually_exclusive_group(required=True)
        g.add_argument("--maneuver", metavar="PATH", help="CSV with columns t,cl,cm,cn")
        g.add_argument("--synth", action="store_true", help="built-in synthetic turn reversal")

    sp = sub.add_parser("ams", help="build the AMS and export OFF files")
    common(sp)

    sp = sub.add_parser("run", help="replay a maneuver through allocation and actuators")
    common(sp)
    maneuver(sp)
    sp.add_argument("--compare", choices=["erpi", "pi", "none"], default="none",
                    help="also allocate with a pseudo-inverse baseline")
    sp.add_argument("--precompute", action="store_true",
                    help="build the AMS once instead of at every sample")
    sp.add_argument("--dt", type=float, default=DEFAULT_DT, help="integration step [s]")
    sp.add_argument("--reps", type=int, default=0,
                    help="also run the precomputed-vs-recomputed timing study N times")

    sp = sub.add_parser("bench", help="precomputed vs recomputed AMS timing study")
    common(sp)
    maneuver(sp)
    sp.add_argument("--reps", type=int, default=100, help="maneuver repetitions (precomputed)")
    sp.add_argument("--recompute-reps", type=int, default=1,
                    help="maneuver repetitions with the AMS rebuilt per sample")
    return p


# ---------------------------------------------------------------------------
# inputs
# ---------------------------------------------------------------------------


def load_inputs(args):
    if args.builtin:
        print(f"note: {f18.A_MATRIX_NOTE}")
        return f18.model(), f18.actuators()
    path = Path(args.model)
    if not path.is_file():
        raise InputError(f"model file not found: {path}")
    return load_model(path)


def load_maneuver(args):
    if args.synth:
        return synth_maneuver()
    path = Path(args.maneuver)
    if not path.is_file():
        raise InputError(f"maneuver file not found: {path}")
    return load_maneuver_csv(path)


def resolve_mode(model: AircraftModel, name) -> Mode:
    mode = default_mode(model) if name is None else Mode(name)
    if mode is not Mode.POSITION_ONLY and not model.has_rate:
        raise InputError(f"mode {mode} needs rate limits and A in the model")
    return mode


def out_dir(args) -> Path:
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


# ---------------------------------------------------------------------------
# ams
# ---------------------------------------------------------------------------


def _report_hull(label: str, hull: PolytopeV, path: Path) -> None:
    lo, hi = hull.extents()
    print(f"{label}: {hull.n_vertices} vertices, {hull.n_facets} facets -> {path}")
    for k, ax in enumerate(AXES):
        print(f"  {ax}: min {lo[k]:+.6f}  max {hi[k]:+.6f}")


def cmd_ams(args) -> int:
    model, _ = load_inputs(args)
    mode = resolve_mode(model, args.mode)
    d = out_dir(args)
    # the half-space form is what allocation clips against, so build it here too
    hull, _ = build_ams(model, mode, args.eps)
    pos = hull if mode is Mode.POSITION_ONLY else position_hull(model, args.eps)
    write_off(pos, d / "ams_position.off")
    _report_hull("position AMS", pos, d / "ams_position.off")
    if mode is not Mode.POSITION_ONLY:
        rate = rate_hull(model, args.eps)
        write_off(rate, d / "ams_rate.off")
        _report_hull("rate AMS", rate, d / "ams_rate.off")
        write_off(hull, d / "ams_intersection.off")
        _report_hull(f"combined AMS ({mode})", hull, d / "ams_intersection.off")
    return EXIT_OK


# ---------------------------------------------------------------------------
# timing
# ---------------------------------------------------------------------------


def time_allocations(model, mode, taus, reps, precompute, eps, clock=time.perf_counter):
    """Per-call wall times, shape (reps, n). Each repetition starts cold."""
    alloc = Allocator(model, mode, precompute=precompute, eps=eps)
    out = np.zeros((reps, len(taus)))
    for r in range(reps):
        alloc.reset()
        for k, tau in enumerate(taus):
            t0 = clock()
            alloc.allocate(tau)
            out[r, k] = clock() - t0
    return out


def histogram(times: np.ndarray, bucket: float = HIST_BUCKET_S, n_buckets=None):
    top = float(times.max(initial=0.0))
    n = n_buckets or int(np.floor(top / bucket)) + 1
    idx = np.minimum((times / bucket).astype(int), n - 1)
    return np.bincount(idx.ravel(), minlength=n)


def summarize(times: np.ndarray) -> dict:
    t = times.ravel()
    return {
        "n": t.size, "mean": float(t.mean()), "p50": float(np.percentile(t, 50)),
        "p95": float(np.percentile(t, 95)), "p99": float(np.percentile(t, 99)),
        "max": float(t.max()),
    }


def timing_study(model, mode, t, taus, reps, recompute_reps, eps, d: Path) -> dict:
    arms = {}
    if reps > 0:
        arms[1] = time_allocations(model, mode, taus, reps, True, eps)
    if recompute_reps > 0:
        arms[0] = time_allocations(model, mode, taus, recompute_reps, False, eps)
    rows = {"rep": [], "sample": [], "t": [], "precomputed": [], "solve_time_s": []}
    for flag, tm in arms.items():
        r, k = np.indices(tm.shape)
        rows["rep"].append(r.ravel())
        rows["sample"].append(k.ravel())
        rows["t"].append(t[k.ravel()])
        rows["precomputed"].append(np.full(tm.size, flag))
        rows["solve_time_s"].append(tm.ravel())
    write_series(d / "timing.csv", list(rows), [np.concatenate(v) for v in rows.values()])

    top = max(float(tm.max()) for tm in arms.values())
    nb = int(np.floor(top / HIST_BUCKET_S)) + 1
    edges = np.arange(nb) * HIST_BUCKET_S * 1e3
    hist = {flag: histogram(tm, n_buckets=nb) for flag, tm in arms.items()}
    zeros = np.zeros(nb, dtype=int)
    write_series(d / "timing_hist.csv",
                 ["bucket_lo_ms", "bucket_hi_ms", "count_precomputed", "count_recomputed"],
                 [edges, edges + HIST_BUCKET_S * 1e3, hist.get(1, zeros), hist.get(0, zeros)])

    stats = {flag: summarize(tm) for flag, tm in arms.items()}
    keys = ["n", "mean", "p50", "p95", "p99", "max"]
    flags = sorted(stats, reverse=True)
    write_series(d / "timing_summary.csv", ["precomputed", "reps"] + [f"{k}_s" if k != "n" else k
                                                                     for k in keys],
                 [flags, [arms[f].shape[0] for f in flags]]
                 + [[stats[f][k] for f in flags] for k in keys])

    print(f"timing ({backend()} kernels), 1 ms histogram in {d / 'timing_hist.csv'}")
    for f in flags:
        s = stats[f]
        label = "precomputed AMS" if f else "recomputed AMS "
        print(f"  {label}: {arms[f].shape[0]} reps x {len(taus)} samples, "
              f"mean {s['mean'] * 1e3:.3f} ms, p50 {s['p50'] * 1e3:.3f} ms, "
              f"p95 {s['p95'] * 1e3:.3f} ms, max {s['max'] * 1e3:.3f} ms")
    if 0 in stats and 1 in stats:
        print(f"  speed-up from precomputation: {stats[0]['mean'] / stats[1]['mean']:.1f}x")
    return stats


# ---------------------------------------------------------------------------
# run / bench
# ---------------------------------------------------------------------------


def _baseline_inputs(model, taus, method):
    if method == "erpi":
        res = [erpi_allocate(model, tau) for tau in taus]
        return np.array([r.u for r in res]), np.array([bool(r.saturated) for r in res])
    u = np.array([pseudo_inverse_allocate(model.B, tau) for tau in taus])
    lim = model.position_limits
    sat = np.any((u >= lim.upper - 1e-9) | (u <= lim.lower + 1e-9), axis=1)
    return u, sat


def cmd_run(args) -> int:
    model, acts = load_inputs(args)
    if acts is None:
        raise InputError("the model has no [actuators] table; 'run' needs actuator dynamics")
    mode = resolve_mode(model, args.mode)
    maneuver = load_maneuver(args)
    if args.reps < 0:
        raise InputError("--reps must be >= 0")
    d = out_dir(args)
    alloc = Allocator(model, mode, precompute=args.precompute, eps=args.eps)
    series = run_experiment(model, acts, maneuver, dt=args.dt, allocator=alloc)
    names = [model.label(j) for j in range(model.m)]
    t = series.t

    header, cols = ["t"] + names, [t] + list(series.u.T)
    if args.compare != "none":
        ub, bsat = _baseline_inputs(model, series.tau_cmd, args.compare)
        header += [f"{args.compare}_{n}" for n in names]
        cols += list(ub.T)
    write_series(d / "inputs.csv", header, cols)
    write_series(d / "realized.csv", ["t"] + names + list(AXES),
                 [t] + list(series.u_act.T) + list(series.tau_realized.T))
    write_series(d / "clip.csv", ["t", "scale", "was_clipped"],
                 [t, series.scale, series.was_clipped])

    lim = model.position_limits
    viol = series.max_position_violation(lim.lower, lim.upper)
    s = summarize(series.solve_time)
    print(f"run: mode {mode}, {t.size} samples, AMS {'precomputed' if args.precompute else 'rebuilt per sample'}")
    print(f"  clipped samples: {int(series.was_clipped.sum())}")
    print(f"  max limit violation of realized positions: {viol:.3e} deg")
    print(f"  clamp events: {int(series.clamp_events.sum())}, "
          f"largest pre-clamp excess {series.clamp_excess.max():.3e} deg")
    print(f"  total variation of commanded u: {series.total_variation():.3f} deg")
    print(f"  solve time: mean {s['mean'] * 1e3:.3f} ms, p50 {s['p50'] * 1e3:.3f} ms, "
          f"p95 {s['p95'] * 1e3:.3f} ms, max {s['max'] * 1e3:.3f} ms")
    if args.compare != "none":
        free = ~(bsat | _qp_saturated(series.u, lim))
        gap = np.abs(series.u[free] - ub[free]).max(initial=0.0)
        print(f"  {args.compare} vs QP on {int(free.sum())} unsaturated samples: "
              f"max |du| {gap:.3e} deg")

    if args.reps > 0:
        timing_study(model, mode, t, series.tau_cmd, args.reps, 1, args.eps, d)
    else:
        write_series(d / "timing.csv", ["rep", "sample", "t", "precomputed", "solve_time_s"],
                     [np.zeros(t.size, dtype=int), np.arange(t.size), t,
                      np.full(t.size, int(args.precompute)), series.solve_time])
    return EXIT_OK


def _qp_saturated(u, lim, tol=1e-9):
    return np.any((u >= lim.upper - tol) | (u <= lim.lower + tol), axis=1)


def cmd_bench(args) -> int:
    model, _ = load_inputs(args)
    mode = resolve_mode(model, args.mode)
    maneuver = load_maneuver(args)
    if args.reps < 1 or args.recompute_reps < 0:
        raise InputError("--reps must be >= 1 and --recompute-reps >= 0")
    d = out_dir(args)
    t, taus = maneuver_arrays(maneuver)
    t0 = time.perf_counter()
    timing_study(model, mode, t, taus, args.reps, args.recompute_reps, args.eps, d)
    print(f"  benchmark wall time: {time.perf_counter() - t0:.1f} s")
    return EXIT_OK


COMMANDS = {"ams": cmd_ams, "run": cmd_run, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (InputError, ModelFileError, FileNotFoundError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GeometryError, QPError, ClipConsistencyError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
