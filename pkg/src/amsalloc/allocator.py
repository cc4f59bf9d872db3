"""Constrained control allocation on the attainable moment set.

An unattainable command is scaled back along its own direction onto the AMS
boundary, after which the allocation QP is feasible by construction and is
solved without slack variables.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .polytope import (
    DEFAULT_EPS,
    BoxLimits,
    PolytopeH,
    PolytopeV,
    contains,
    convex_hull_3d,
    enumerate_vertices,
    intersect,
    map_vertices,
    to_halfspace,
)
from .qp import QPDiagnostics, QPInfeasibleError, qp_solve

EQUALITY_TOL = 1e-8
# Tolerance used when clipping ahead of the QP: tighter than the membership
# epsilon so the clipped moment never sits outside the true set by more than
# rounding.
ALLOC_CLIP_TOL = 1e-12


class Mode(str, enum.Enum):
    POSITION_ONLY = "position_only"
    RATE_PAPER = "rate_paper"
    RATE_EXACT = "rate_exact"

    def __str__(self) -> str:
        return self.value


class UnsupportedModeError(ValueError):
    pass


class ClipConsistencyError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class AircraftModel:
    """Linear effectiveness model with position and (optional) rate limits.

    ``A`` imposes ``u_dot = A u``; ``R`` and ``R_rate`` weight ``u`` and
    ``u_dot`` in the objective (identity when omitted).
    """

    B: np.ndarray
    position_limits: BoxLimits
    rate_limits: Optional[BoxLimits] = None
    A: Optional[np.ndarray] = None
    R: Optional[np.ndarray] = None
    R_rate: Optional[np.ndarray] = None
    names: Optional[Sequence[str]] = None

    def __post_init__(self):
        B = np.atleast_2d(np.asarray(self.B, dtype=float)).copy()
        if B.shape[0] != 3:
            raise ValueError(f"B must have 3 rows (c_l, c_m, c_n), got {B.shape}")
        m = B.shape[1]
        if np.linalg.matrix_rank(B) < 3:
            raise ValueError("rank(B) < 3: the attainable moment set would be degenerate")
        if self.position_limits.m != m:
            raise ValueError(f"position limits cover {self.position_limits.m} actuators, B has {m}")
        if self.rate_limits is not None and self.rate_limits.m != m:
            raise ValueError(f"rate limits cover {self.rate_limits.m} actuators, B has {m}")
        B.flags.writeable = False
        object.__setattr__(self, "B", B)

        if self.A is not None:
            A = np.atleast_2d(np.asarray(self.A, dtype=float)).copy()
            if A.shape != (m, m):
                raise ValueError(f"A must be {m}x{m}, got {A.shape}")
            if abs(np.linalg.det(A)) <= 1e-12 * max(1.0, np.abs(A).max()) ** m:
                raise ValueError("A must be invertible (det(A) != 0)")
            A.flags.writeable = False
            object.__setattr__(self, "A", A)

        for name in ("R", "R_rate"):
            R = getattr(self, name)
            R = np.eye(m) if R is None else np.atleast_2d(np.asarray(R, dtype=float)).copy()
            if R.shape != (m, m) or not np.allclose(R, R.T):
                raise ValueError(f"{name} must be a symmetric {m}x{m} matrix")
            if np.linalg.eigvalsh(R).min() <= 0.0:
                raise ValueError(f"{name} must be positive definite")
            R.flags.writeable = False
            object.__setattr__(self, name, R)

        if self.names is not None:
            names = tuple(str(n) for n in self.names)
            if len(names) != m:
                raise ValueError(f"{len(names)} names given for {m} actuators")
            object.__setattr__(self, "names", names)

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def has_rate(self) -> bool:
        return self.rate_limits is not None and self.A is not None

    @property
    def diagonal_A(self) -> bool:
        return self.A is not None and np.count_nonzero(self.A - np.diag(np.diag(self.A))) == 0

    def label(self, j: int) -> str:
        return self.names[j] if self.names else f"u{j + 1}"


def default_mode(model: AircraftModel) -> Mode:
    if not model.has_rate:
        return Mode.POSITION_ONLY
    if model.diagonal_A:
        return Mode.RATE_EXACT
    warnings.warn("non-diagonal A: falling back to the hull-intersection AMS (rate_paper); "
                  "the allocation QP is not guaranteed feasible in this mode", stacklevel=2)
    return Mode.RATE_PAPER


def _require_rate(model: AircraftModel, mode: Mode) -> None:
    if not model.has_rate:
        raise UnsupportedModeError(f"mode {mode} needs rate limits and a dynamic matrix A")


def rate_exact_limits(model: AircraftModel) -> BoxLimits:
    """Box ``U ∩ A^-1 U_dot`` for diagonal ``A``."""
    _require_rate(model, Mode.RATE_EXACT)
    if not model.diagonal_A:
        raise UnsupportedModeError("unsupported: exact mode requires diagonal A")
    a = np.diag(model.A)
    r1 = model.rate_limits.lower / a
    r2 = model.rate_limits.upper / a
    lo = np.maximum(model.position_limits.lower, np.minimum(r1, r2))
    hi = np.minimum(model.position_limits.upper, np.maximum(r1, r2))
    return BoxLimits(lo, hi)


def position_hull(model: AircraftModel, eps: float = DEFAULT_EPS) -> PolytopeV:
    return convex_hull_3d(map_vertices(enumerate_vertices(model.position_limits), model.B), eps)


def rate_hull(model: AircraftModel, eps: float = DEFAULT_EPS) -> PolytopeV:
    _require_rate(model, Mode.RATE_PAPER)
    T = model.B @ np.linalg.inv(model.A)
    return convex_hull_3d(map_vertices(enumerate_vertices(model.rate_limits), T), eps)


def build_ams(model: AircraftModel, mode: Mode | str | None = None,
              eps: float = DEFAULT_EPS) -> tuple[PolytopeV, PolytopeH]:
    mode = default_mode(model) if mode is None else Mode(mode)
    if mode is Mode.POSITION_ONLY:
        hull = position_hull(model, eps)
    elif mode is Mode.RATE_PAPER:
        hull = intersect(position_hull(model, eps), rate_hull(model, eps), eps)
    else:
        box = rate_exact_limits(model)
        hull = convex_hull_3d(map_vertices(enumerate_vertices(box), model.B), eps)
    return hull, to_halfspace(hull, eps)


# ---------------------------------------------------------------------------
# direction-preserving clipping
# ---------------------------------------------------------------------------


@dataclass
class ClipResult:
    tau: np.ndarray
    scale: float
    was_clipped: bool
    candidates: np.ndarray
    scaling_vector: np.ndarray
    tau_cmd: np.ndarray = field(repr=False, default=None)


def clip_to_ams(tau_cmd, h: PolytopeH, tol: float | None = None) -> ClipResult:
    """Scale ``tau_cmd`` onto the AMS boundary if it lies outside.

    Every facet row with ``N_i . tau_cmd > 0`` yields a candidate
    ``tau_cmd / (N_i . tau_cmd)``; candidates that satisfy all rows are the
    boundary crossings, and the one nearest the command is returned.
    """
    tol = h.tolerance if tol is None else tol
    tau_cmd = np.asarray(tau_cmd, dtype=float).reshape(3)
    if not np.all(np.isfinite(tau_cmd)):
        raise ValueError("commanded moment must be finite")
    proj = h.normals @ tau_cmd
    # subnormal projections overflow; the resulting inf/nan candidates fail the check
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        r_s = np.where(proj > 0.0, 1.0 / np.where(proj > 0.0, proj, 1.0), np.inf)
        if np.all(proj <= 1.0 + tol):
            return ClipResult(tau_cmd.copy(), 1.0, False, np.empty((0, 3)), r_s, tau_cmd)
        rows = np.flatnonzero(np.isfinite(r_s))
        omega = np.outer(r_s[rows], tau_cmd)             # one candidate per row
        ok = np.all(omega @ h.normals.T <= 1.0 + tol, axis=1)
    pois, poi_rows = omega[ok], rows[ok]
    if pois.shape[0] == 0:
        raise ClipConsistencyError(
            "no admissible intersection point; the half-space set does not contain "
            "the origin in its interior")
    dist = np.linalg.norm(tau_cmd - pois, axis=1)
    # ties within tolerance go to the lowest facet index
    near = np.flatnonzero(dist <= dist.min() + tol * np.linalg.norm(tau_cmd))
    pick = near[np.argmin(poi_rows[near])]
    s = float(r_s[poi_rows[pick]])
    return ClipResult(s * tau_cmd, s, True, pois, r_s, tau_cmd)


def clip_many(taus, h: PolytopeH, tol: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised clip: returns ``(scale, was_clipped)`` per row of ``taus``.

    Ties may resolve to a different (equidistant) row than :func:`clip_to_ams`
    but the returned scale is the same candidate up to ``tol``.
    """
    tol = h.tolerance if tol is None else tol
    taus = np.ascontiguousarray(np.atleast_2d(np.asarray(taus, dtype=float)))
    return _kernels.clip_batch(np.ascontiguousarray(h.normals), taus, float(tol))


# ---------------------------------------------------------------------------
# allocation
# ---------------------------------------------------------------------------


@dataclass
class AllocationResult:
    u: np.ndarray
    u_dot: Optional[np.ndarray]
    tau_achieved: np.ndarray
    tau_cmd: np.ndarray
    clip: ClipResult
    active_set: list[str]
    active_rows: list[int]
    iterations: int
    kkt_residual: float
    diagnostics: QPDiagnostics = field(repr=False, default=None)

    @property
    def was_clipped(self) -> bool:
        return self.clip.was_clipped

    @property
    def scale(self) -> float:
        return self.clip.scale


def _qp_data(model: AircraftModel, mode: Mode):
    m = model.m
    eye = np.eye(m)
    lim = model.position_limits
    G = [eye, -eye]
    h = [lim.upper, -lim.lower]
    labels = [f"{model.label(j)}<=upper" for j in range(m)]
    labels += [f"{model.label(j)}>=lower" for j in range(m)]
    H = model.R.copy()
    if mode is not Mode.POSITION_ONLY:
        _require_rate(model, mode)
        A = model.A
        H = H + A.T @ model.R_rate @ A
        G += [A, -A]
        h += [model.rate_limits.upper, -model.rate_limits.lower]
        labels += [f"d/dt {model.label(j)}<=upper" for j in range(m)]
        labels += [f"d/dt {model.label(j)}>=lower" for j in range(m)]
    return H, np.vstack(G), np.concatenate(h), labels


class Allocator:
    """Allocation session for one model and mode.

    Holds the AMS (built once when ``precompute`` is true, otherwise rebuilt on
    every call) and the previous active set used to warm-start the QP. One
    session serves one sequential maneuver.
    """

    def __init__(self, model: AircraftModel, mode: Mode | str | None = None, *,
                 precompute: bool = True, precomputed=None, eps: float = DEFAULT_EPS,
                 warm_start: bool = True):
        self.model = model
        self.mode = default_mode(model) if mode is None else Mode(mode)
        self.eps = eps
        self.precompute = precompute
        self.warm_start = warm_start
        self._H, self._G, self._h, self._labels = _qp_data(model, self.mode)
        self._geometry = precomputed
        if self._geometry is None and precompute:
            self._geometry = build_ams(model, self.mode, eps)
        self._last_active: list[int] = []

    @property
    def geometry(self) -> tuple[PolytopeV, PolytopeH]:
        if self._geometry is None:
            return build_ams(self.model, self.mode, self.eps)
        return self._geometry

    def reset(self) -> None:
        self._last_active = []

    def allocate(self, tau_cmd) -> AllocationResult:
        if self.precompute or self._geometry is not None:
            _, hrep = self._geometry
        else:
            _, hrep = build_ams(self.model, self.mode, self.eps)
        clip = clip_to_ams(tau_cmd, hrep, tol=min(hrep.tolerance, ALLOC_CLIP_TOL))
        warm = self._last_active if self.warm_start else None
        try:
            u, diag = qp_solve(self._H, self.model.B, clip.tau, self._G, self._h,
                               warm_start=warm)
        except QPInfeasibleError as exc:
            raise QPInfeasibleError(
                f"allocation QP infeasible in mode {self.mode} for tau={clip.tau.tolist()}: "
                f"{exc}") from exc
        self._last_active = diag.active_set
        u_dot = self.model.A @ u if self.mode is not Mode.POSITION_ONLY else None
        return AllocationResult(
            u=u,
            u_dot=u_dot,
            tau_achieved=self.model.B @ u,
            tau_cmd=clip.tau_cmd,
            clip=clip,
            active_set=[self._labels[i] for i in diag.active_set],
            active_rows=list(diag.active_set),
            iterations=diag.iterations,
            kkt_residual=diag.kkt_residual,
            diagnostics=diag,
        )


def allocate(model: AircraftModel, tau_cmd, mode: Mode | str | None = None,
             precomputed: tuple[PolytopeV, PolytopeH] | None = None) -> AllocationResult:
    """One-shot allocation (no warm start carried between calls)."""
    return Allocator(model, mode, precomputed=precomputed, warm_start=False).allocate(tau_cmd)


__all__ = [
    "AircraftModel", "AllocationResult", "Allocator", "ClipResult", "Mode",
    "UnsupportedModeError", "allocate", "build_ams", "clip_many", "clip_to_ams",
    "contains", "default_mode", "position_hull", "qp_solve", "rate_exact_limits", "rate_hull",
]
