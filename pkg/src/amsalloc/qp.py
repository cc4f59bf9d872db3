"""Dense primal active-set solver for small strictly convex QPs.

    minimize    1/2 x'Hx + c'x
    subject to  Aeq x = beq,  Aineq x <= bineq

Multiplier convention: ``Hx + c + Aeq' nu + Aineq' lam = 0`` with ``lam >= 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class QPError(RuntimeError):
    pass


class QPInfeasibleError(QPError):
    pass


class QPStalledError(QPError):
    def __init__(self, msg: str, x: np.ndarray):
        super().__init__(msg)
        self.x = x


@dataclass
class QPDiagnostics:
    active_set: list[int]
    iterations: int
    kkt_residual: float
    eq_multipliers: np.ndarray
    ineq_multipliers: np.ndarray
    phase1_iterations: int = 0
    warm_started: bool = False
    extra: dict = field(default_factory=dict)


def _as2d(A, n: int) -> np.ndarray:
    if A is None:
        return np.zeros((0, n))
    return np.atleast_2d(np.asarray(A, dtype=float)).reshape(-1, n)


def _as1d(b) -> np.ndarray:
    if b is None:
        return np.zeros(0)
    return np.atleast_1d(np.asarray(b, dtype=float)).ravel()


def _solve_eqp(H, g, C, d):
    """min 1/2 p'Hp + g'p  s.t.  C p = d.  Returns (p, multipliers)."""
    n = H.shape[0]
    k = C.shape[0]
    K = np.zeros((n + k, n + k))
    K[:n, :n] = H
    K[:n, n:] = C.T
    K[n:, :n] = C
    rhs = np.concatenate([-g, d])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    return sol[:n], sol[n:]


def _independent(rows: np.ndarray, cand: np.ndarray, tol: float = 1e-10) -> bool:
    if rows.shape[0] == 0:
        return bool(np.linalg.norm(cand) > tol)
    stacked = np.vstack([rows, cand])
    if stacked.shape[0] > stacked.shape[1]:
        return False
    s = np.linalg.svd(stacked, compute_uv=False)
    return bool(s[-1] > tol * max(1.0, s[0]))


def _primal_active_set(H, c, Aeq, beq, G, h, x, working, max_iter, ftol):
    """Core iteration from a feasible ``x``. Returns (x, working, nu, lam, iters)."""
    W = list(working)
    p_eq = Aeq.shape[0]
    at_min = False
    for it in range(1, max_iter + 1):
        C = np.vstack([Aeq, G[W]]) if W else Aeq
        g = H @ x + c
        p, mult = _solve_eqp(H, g, C, np.zeros(C.shape[0]))
        step_scale = max(1.0, np.linalg.norm(x, np.inf))
        # after an unblocked full step x already minimizes on W, and a square
        # working set pins x; in both cases p is rounding noise
        if at_min or C.shape[0] >= x.size or np.linalg.norm(p, np.inf) <= 1e-12 * step_scale:
            # y from K[p; y] = [-g; 0] are the multipliers in Hx + c + C'y = 0
            lam_w = mult[p_eq:]
            if lam_w.size == 0 or lam_w.min() >= -1e-12 * max(1.0, np.abs(lam_w).max()):
                lam = np.zeros(G.shape[0])
                lam[W] = lam_w
                return x, W, mult[:p_eq], lam, it
            W.pop(int(np.argmin(lam_w)))
            at_min = False
            continue
        # ratio test over constraints outside the working set
        alpha = 1.0
        block = -1
        Gp = G @ p
        slack = h - G @ x
        in_w = np.zeros(G.shape[0], dtype=bool)
        in_w[W] = True
        pn = np.linalg.norm(p)
        toward = (~in_w) & (Gp > 1e-11 * pn * np.linalg.norm(G, axis=1))
        for i in np.flatnonzero(toward):
            a = max(slack[i], 0.0) / Gp[i]
            if a < alpha:
                alpha = a
                block = int(i)
        if block >= 0 and not _independent(C, G[block]):
            raise QPStalledError("blocking constraint is dependent on the working set", x)
        x = x + alpha * p
        if block >= 0:
            W.append(block)
        at_min = block < 0
    raise QPStalledError(f"QP stalled after {max_iter} iterations", x)


def kkt_residual(H, c, Aeq, beq, G, h, x, nu, lam) -> float:
    """Max of stationarity, primal and complementarity violations."""
    stat = H @ x + c + Aeq.T @ nu + G.T @ lam
    r = [np.abs(stat).max(initial=0.0)]
    if Aeq.shape[0]:
        r.append(np.abs(Aeq @ x - beq).max())
    if G.shape[0]:
        viol = G @ x - h
        r.append(max(viol.max(), 0.0))
        r.append(max(-lam.min(), 0.0))
        r.append(np.abs(lam * viol).max())
    return float(max(r))


def _phase1(H, c, Aeq, beq, G, h, x0, max_iter, ftol):
    """Feasible point via an exact-penalty auxiliary problem in (x, t).

    Constraints G x - t <= h, t >= 0 are satisfied by (x0, max violation);
    the penalty weight grows until t reaches zero.
    """
    n = x0.size
    q = G.shape[0]
    Hs = np.zeros((n + 1, n + 1))
    Hs[:n, :n] = H
    Hs[n, n] = 1e-8 * max(1.0, np.abs(H).max())
    Aeq_s = np.hstack([Aeq, np.zeros((Aeq.shape[0], 1))])
    G_s = np.zeros((q + 1, n + 1))
    G_s[:q, :n] = G
    G_s[:q, n] = -1.0
    G_s[q, n] = -1.0
    h_s = np.concatenate([h, [0.0]])
    t0 = max(float((G @ x0 - h).max()), 0.0)
    z = np.concatenate([x0, [t0 * 1.0001 + ftol]])
    W: list[int] = []
    rho = 1e3 * max(1.0, np.abs(H).max(), np.abs(c).max(initial=0.0))
    total = 0
    t_prev = np.inf
    for _ in range(8):
        cs = np.concatenate([c, [rho]])
        try:
            z, W, _, _, its = _primal_active_set(Hs, cs, Aeq_s, beq, G_s, h_s, z, W,
                                                 max_iter, ftol)
        except QPStalledError as exc:
            raise QPStalledError(f"feasibility phase: {exc}", exc.x[:n]) from exc
        total += its
        if z[n] <= ftol:
            return z[:n], [i for i in W if i < q], total
        if z[n] >= 0.999 * t_prev:
            break
        t_prev = z[n]
        rho *= 100.0
    raise QPInfeasibleError(
        f"inequality system appears infeasible (residual violation {z[n]:.3e})")


def qp_solve(H, Aeq=None, beq=None, Aineq=None, bineq=None, c=None, *,
             warm_start=None, max_iter: int | None = None, ftol: float = 1e-10):
    """Solve the QP; return ``(x, QPDiagnostics)``.

    ``warm_start`` is a list of inequality indices guessed to be active. The
    guess is tried first by solving with those rows as equalities; if that
    point is feasible the iteration starts there, otherwise a penalty phase
    finds a feasible start.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    n = H.shape[0]
    if H.shape != (n, n):
        raise ValueError(f"H must be square, got {H.shape}")
    c = np.zeros(n) if c is None else _as1d(c)
    Aeq, beq = _as2d(Aeq, n), _as1d(beq)
    G, h = _as2d(Aineq, n), _as1d(bineq)
    if Aeq.shape[0] != beq.size or G.shape[0] != h.size:
        raise ValueError("constraint matrix / vector size mismatch")
    q = G.shape[0]
    if max_iter is None:
        max_iter = 10 * (n + q)
    feas_tol = ftol * (1.0 + np.abs(h).max(initial=0.0))

    eq_tol = 1e-9 * (1.0 + np.abs(beq).max(initial=0.0))

    def candidate(W):
        C = np.vstack([Aeq, G[W]]) if W else Aeq
        d = np.concatenate([beq, h[W]]) if W else beq
        return _solve_eqp(H, c, C, d)[0]

    def feasible(x):
        if Aeq.shape[0] and np.abs(Aeq @ x - beq).max() > eq_tol:
            return False
        return q == 0 or (G @ x - h).max() <= feas_tol

    x0 = None
    W0: list[int] = []
    warm = False
    p1 = 0
    if warm_start:
        for i in dict.fromkeys(int(i) for i in warm_start):
            if 0 <= i < q and _independent(np.vstack([Aeq, G[W0]]), G[i]):
                W0.append(i)
        xw = candidate(W0)
        if feasible(xw):
            x0, warm = xw, True
        else:
            W0 = []
    if x0 is None:
        xu = candidate([])
        if Aeq.shape[0] and np.abs(Aeq @ xu - beq).max() > eq_tol:
            raise QPInfeasibleError("equality constraints are inconsistent")
        if feasible(xu):
            x0 = xu
        else:
            x0, W0, p1 = _phase1(H, c, Aeq, beq, G, h, xu, max_iter, feas_tol)
            # only rows active at x0 may seed the working set
            kept: list[int] = []
            for w in W0:
                if abs(G[w] @ x0 - h[w]) <= 1e3 * feas_tol and \
                        _independent(np.vstack([Aeq, G[kept]]), G[w]):
                    kept.append(w)
            W0 = kept

    x, W, nu, lam, iters = _primal_active_set(H, c, Aeq, beq, G, h, x0, W0, max_iter, feas_tol)
    res = kkt_residual(H, c, Aeq, beq, G, h, x, nu, lam)
    diag = QPDiagnostics(active_set=sorted(W), iterations=iters, kkt_residual=res,
                         eq_multipliers=nu, ineq_multipliers=lam,
                         phase1_iterations=p1, warm_started=warm)
    return x, diag
