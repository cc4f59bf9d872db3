"""Convex geometry of attainable moment sets in three dimensions.

Box limit sets are enumerated corner by corner, pushed through a linear map
and wrapped with a quickhull. A hull is turned into normalized half-spaces
``N @ tau <= 1`` (origin inside), and two hulls are intersected by pooling
their half-spaces and recovering vertices through the polar dual.
"""
from __future__ import annotations

import io
import os
from collections import deque
from dataclasses import dataclass
from typing import Iterable, TextIO

import numpy as np

DEFAULT_EPS = 1e-9
DEFAULT_VERTEX_CAP = 16


class GeometryError(ValueError):
    """Base class for polytope construction failures."""


class VertexExplosionError(GeometryError):
    def __init__(self, m: int, cap: int):
        super().__init__(
            f"vertex explosion: 2**{m} box corners requested but the cap is m <= {cap}")
        self.m = m
        self.cap = cap


class DegenerateHullError(GeometryError):
    def __init__(self, rank: int, msg: str = ""):
        text = f"degenerate hull: input points have affine rank {rank} < 3"
        super().__init__(f"{text} ({msg})" if msg else text)
        self.rank = rank


class OriginNotInteriorError(GeometryError):
    pass


class DegenerateIntersectionError(GeometryError):
    pass


@dataclass(frozen=True)
class BoxLimits:
    """Per-actuator lower/upper bounds (deg or deg/s)."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float)).copy()
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise ValueError(f"bound shapes differ: {lo.shape} vs {hi.shape}")
        if lo.size < 1:
            raise ValueError("BoxLimits needs at least one actuator")
        if not np.all(lo < hi):
            bad = np.flatnonzero(~(lo < hi)).tolist()
            raise ValueError(f"lower must be < upper for every actuator; violated at {bad}")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def m(self) -> int:
        return self.lower.size

    def contains(self, u, tol: float = 0.0) -> bool:
        u = np.asarray(u, dtype=float)
        return bool(np.all(u >= self.lower - tol) and np.all(u <= self.upper + tol))

    def clip(self, u) -> np.ndarray:
        return np.clip(u, self.lower, self.upper)


@dataclass(frozen=True, eq=False)
class PolytopeV:
    """Vertex form: extreme points plus outward-oriented triangular facets."""

    vertices: np.ndarray
    facets: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 3).copy()
        f = np.asarray(self.facets, dtype=np.intp).reshape(-1, 3).copy()
        v.flags.writeable = False
        f.flags.writeable = False
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "facets", f)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_facets(self) -> int:
        return self.facets.shape[0]

    def edges(self) -> set[tuple[int, int]]:
        out = set()
        for a, b, c in self.facets:
            for p, q in ((a, b), (b, c), (c, a)):
                out.add((min(p, q), max(p, q)))
        return out

    def euler_characteristic(self) -> int:
        return self.n_vertices - len(self.edges()) + self.n_facets

    def planes(self) -> tuple[np.ndarray, np.ndarray]:
        """Unit outward normals and offsets, one per facet."""
        v = self.vertices
        a, b, c = v[self.facets[:, 0]], v[self.facets[:, 1]], v[self.facets[:, 2]]
        n = np.cross(b - a, c - a)
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        return n, np.einsum("ij,ij->i", n, a)

    def extents(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def circumradius(self) -> float:
        c = self.vertices.mean(axis=0)
        return float(np.linalg.norm(self.vertices - c, axis=1).max())

    def volume(self) -> float:
        c = self.vertices.mean(axis=0)
        v = self.vertices - c
        a, b, d = v[self.facets[:, 0]], v[self.facets[:, 1]], v[self.facets[:, 2]]
        return float(np.einsum("ij,ij->i", a, np.cross(b, d)).sum() / 6.0)


@dataclass(frozen=True, eq=False)
class PolytopeH:
    """Normalized half-space form ``normals @ tau <= 1``.

    ``tolerance`` is dimensionless because the right-hand side is 1.
    """

    normals: np.ndarray
    tolerance: float = DEFAULT_EPS

    def __post_init__(self):
        n = np.asarray(self.normals, dtype=float).reshape(-1, 3).copy()
        n.flags.writeable = False
        object.__setattr__(self, "normals", n)

    @property
    def k(self) -> int:
        return self.normals.shape[0]


# ---------------------------------------------------------------------------
# vertex enumeration and mapping
# ---------------------------------------------------------------------------


def enumerate_vertices(limits: BoxLimits, cap: int = DEFAULT_VERTEX_CAP) -> np.ndarray:
    """All ``2**m`` box corners in binary-counter order (bit j set -> upper[j])."""
    m = limits.m
    if m > cap:
        raise VertexExplosionError(m, cap)
    bits = (np.arange(2**m)[:, None] >> np.arange(m)[None, :]) & 1
    return np.where(bits.astype(bool), limits.upper, limits.lower)


def map_vertices(vertices, T) -> np.ndarray:
    vertices = np.atleast_2d(np.asarray(vertices, dtype=float))
    T = np.atleast_2d(np.asarray(T, dtype=float))
    if T.shape[0] != 3:
        raise ValueError(f"map must have 3 rows, got shape {T.shape}")
    if vertices.shape[1] != T.shape[1]:
        raise ValueError(
            f"vertex dimension {vertices.shape[1]} does not match map columns {T.shape[1]}")
    return vertices @ T.T


# ---------------------------------------------------------------------------
# quickhull
# ---------------------------------------------------------------------------


def affine_rank(points: np.ndarray, tol: float) -> int:
    if points.shape[0] == 0:
        return -1
    s = np.linalg.svd(points - points.mean(axis=0), compute_uv=False)
    return int(np.sum(s > tol))


class _Facet:
    __slots__ = ("verts", "normal", "offset", "outside", "alive")

    def __init__(self, verts, normal, offset):
        self.verts = verts
        self.normal = normal
        self.offset = offset
        self.outside = None
        self.alive = True


def _initial_simplex(pts: np.ndarray, tol: float) -> list[int]:
    i0 = int(np.argmin(pts[:, 0]))
    d = np.linalg.norm(pts - pts[i0], axis=1)
    i1 = int(np.argmax(d))
    if d[i1] <= tol:
        raise DegenerateHullError(0)
    u = (pts[i1] - pts[i0]) / d[i1]
    rel = pts - pts[i0]
    perp = rel - np.outer(rel @ u, u)
    d = np.linalg.norm(perp, axis=1)
    i2 = int(np.argmax(d))
    if d[i2] <= tol:
        raise DegenerateHullError(1)
    n = np.cross(pts[i1] - pts[i0], pts[i2] - pts[i0])
    n /= np.linalg.norm(n)
    d = np.abs(rel @ n)
    i3 = int(np.argmax(d))
    if d[i3] <= tol:
        raise DegenerateHullError(2)
    return [i0, i1, i2, i3]


def convex_hull_3d(points, eps: float = DEFAULT_EPS) -> PolytopeV:
    """Quickhull in three dimensions.

    ``eps`` is relative to the radius of the point cloud; points within that
    distance of a facet plane are treated as on it. Coplanar triangles are
    kept as separate facets.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    n_pts = pts.shape[0]
    if not np.all(np.isfinite(pts)):
        raise ValueError("hull input contains non-finite coordinates")
    centre = pts.mean(axis=0) if n_pts else np.zeros(3)
    radius = float(np.linalg.norm(pts - centre, axis=1).max()) if n_pts else 0.0
    tol = eps * max(radius, np.finfo(float).tiny)
    if n_pts < 4:
        raise DegenerateHullError(affine_rank(pts, tol), f"only {n_pts} points")
    try:
        simplex = _initial_simplex(pts, tol)
    except DegenerateHullError as exc:
        raise DegenerateHullError(affine_rank(pts, tol)) from exc

    interior = pts[simplex].mean(axis=0)
    facets: list[_Facet] = []
    edge_owner: dict[tuple[int, int], int] = {}

    def add_facet(a: int, b: int, c: int) -> int:
        nrm = np.cross(pts[b] - pts[a], pts[c] - pts[a])
        if nrm @ (pts[a] - interior) < 0.0:
            b, c = c, b
            nrm = -nrm
        nrm = nrm / np.linalg.norm(nrm)
        fid = len(facets)
        facets.append(_Facet((a, b, c), nrm, float(nrm @ pts[a])))
        edge_owner[(a, b)] = fid
        edge_owner[(b, c)] = fid
        edge_owner[(c, a)] = fid
        return fid

    s0, s1, s2, s3 = simplex
    new_ids = [add_facet(s0, s1, s2), add_facet(s0, s1, s3),
               add_facet(s0, s2, s3), add_facet(s1, s2, s3)]

    def assign(candidates: np.ndarray, fids: list[int]) -> None:
        if candidates.size == 0:
            for f in fids:
                facets[f].outside = candidates
            return
        normals = np.array([facets[f].normal for f in fids])
        offsets = np.array([facets[f].offset for f in fids])
        dist = pts[candidates] @ normals.T - offsets
        best = np.argmax(dist, axis=1)
        keep = dist[np.arange(candidates.size), best] > tol
        for slot, f in enumerate(fids):
            facets[f].outside = candidates[keep & (best == slot)]

    rest = np.setdiff1d(np.arange(n_pts), simplex)
    assign(rest, new_ids)

    pending = deque(f for f in new_ids if facets[f].outside.size)
    while pending:
        fid = pending.popleft()
        face = facets[fid]
        if not face.alive or face.outside.size == 0:
            continue
        cand = face.outside
        eye = int(cand[np.argmax(pts[cand] @ face.normal - face.offset)])
        p_eye = pts[eye]

        visible = {fid}
        horizon: list[tuple[int, int]] = []
        stack = [fid]
        while stack:
            cur = facets[stack.pop()]
            a, b, c = cur.verts
            for e in ((a, b), (b, c), (c, a)):
                nb = edge_owner[(e[1], e[0])]
                if nb in visible:
                    continue
                other = facets[nb]
                if other.normal @ p_eye - other.offset > tol:
                    visible.add(nb)
                    stack.append(nb)
        # horizon: edges of visible facets whose twin belongs to a hidden facet
        orphans = []
        for vid in visible:
            f = facets[vid]
            a, b, c = f.verts
            for e in ((a, b), (b, c), (c, a)):
                if edge_owner[(e[1], e[0])] not in visible:
                    horizon.append(e)
            orphans.append(f.outside)
        for vid in visible:
            f = facets[vid]
            f.alive = False
            a, b, c = f.verts
            for e in ((a, b), (b, c), (c, a)):
                if edge_owner.get(e) == vid:
                    del edge_owner[e]

        created = []
        for a, b in horizon:
            nrm = np.cross(pts[b] - pts[a], p_eye - pts[a])
            nrm = nrm / np.linalg.norm(nrm)
            nid = len(facets)
            facets.append(_Facet((a, b, eye), nrm, float(nrm @ pts[a])))
            edge_owner[(a, b)] = nid
            edge_owner[(b, eye)] = nid
            edge_owner[(eye, a)] = nid
            created.append(nid)

        pool = np.concatenate(orphans) if orphans else np.empty(0, dtype=np.intp)
        pool = pool[pool != eye]
        assign(pool, created)
        pending.extend(f for f in created if facets[f].outside.size)

    live = [f for f in facets if f.alive]
    tri = np.array([f.verts for f in live], dtype=np.intp)
    used = np.unique(tri)
    remap = np.full(n_pts, -1, dtype=np.intp)
    remap[used] = np.arange(used.size)
    return PolytopeV(pts[used], remap[tri])


# ---------------------------------------------------------------------------
# half-space form and membership
# ---------------------------------------------------------------------------


def to_halfspace(p: PolytopeV, eps: float = DEFAULT_EPS) -> PolytopeH:
    """Rows ``n/d`` for every facet plane ``n . tau = d``; needs 0 strictly inside."""
    normals, offsets = p.planes()
    delta = eps * max(p.circumradius(), np.finfo(float).tiny)
    if np.any(offsets <= delta):
        worst = float(offsets.min())
        raise OriginNotInteriorError(
            f"origin not interior: a facet plane lies at signed distance {worst:.3e} "
            f"(needs > {delta:.3e})")
    return PolytopeH(normals / offsets[:, None], tolerance=eps)


def contains(h: PolytopeH, tau, tol: float | None = None) -> bool:
    tol = h.tolerance if tol is None else tol
    tau = np.asarray(tau, dtype=float)
    return bool(np.all(h.normals @ tau <= 1.0 + tol))


def contains_many(h: PolytopeH, taus, tol: float | None = None) -> np.ndarray:
    tol = h.tolerance if tol is None else tol
    taus = np.atleast_2d(np.asarray(taus, dtype=float))
    return np.all(taus @ h.normals.T <= 1.0 + tol, axis=1)


def _dedupe(points: np.ndarray, tol: float) -> np.ndarray:
    keep: list[np.ndarray] = []
    for p in points:
        if not any(np.max(np.abs(p - q)) <= tol for q in keep):
            keep.append(p)
    return np.array(keep)


def halfspace_to_vertices(normals, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Vertices of ``{tau : normals @ tau <= 1}`` via the polar dual hull.

    Each facet ``a . x = c`` of the hull of the rows maps to the primal vertex
    ``a / c``. Rows strictly inside the dual hull are redundant constraints.
    """
    rows = np.asarray(normals, dtype=float).reshape(-1, 3)
    if rows.shape[0] == 0:
        raise DegenerateIntersectionError("no half-spaces given")
    scale = float(np.abs(rows).max())
    rows = _dedupe(rows, eps * scale)
    try:
        dual = convex_hull_3d(rows, eps=eps)
    except DegenerateHullError as exc:
        raise DegenerateIntersectionError(
            f"half-space normals do not positively span 3-space (dual rank {exc.rank}); "
            "the region is unbounded or lower-dimensional") from exc
    nrm, off = dual.planes()
    dual_radius = max(dual.circumradius(), np.finfo(float).tiny)
    if np.any(off <= eps * dual_radius):
        raise DegenerateIntersectionError(
            "origin is not interior to the dual hull; the region is unbounded")
    verts = nrm / off[:, None]
    vscale = float(np.abs(verts).max())
    return _dedupe(verts, max(eps, 1e-12) * 1e3 * vscale)


def _halfspace_about_origin(p: PolytopeV, eps: float, which: str) -> PolytopeH:
    try:
        return to_halfspace(p, eps)
    except OriginNotInteriorError as exc:
        raise DegenerateIntersectionError(
            f"hull {which} does not contain the origin strictly; the intersection "
            f"is empty or cannot be anchored ({exc})") from exc


def intersect(hull_a: PolytopeV, hull_b: PolytopeV, eps: float = DEFAULT_EPS) -> PolytopeV:
    """Intersection of two origin-containing hulls, as a hull."""
    ha = _halfspace_about_origin(hull_a, eps, "A")
    hb = _halfspace_about_origin(hull_b, eps, "B")
    pooled = np.vstack([ha.normals, hb.normals])
    verts = halfspace_to_vertices(pooled, eps)
    try:
        return convex_hull_3d(verts, eps)
    except DegenerateHullError as exc:
        raise DegenerateIntersectionError(
            f"intersection is lower-dimensional (rank {exc.rank})") from exc


def same_vertex_set(a, b, tol: float) -> bool:
    """Order-free set equality of two point arrays within ``tol`` (inf-norm)."""
    a = np.asarray(a, dtype=float).reshape(-1, 3)
    b = np.asarray(b, dtype=float).reshape(-1, 3)
    if a.shape != b.shape:
        return False
    d = np.abs(a[:, None, :] - b[None, :, :]).max(axis=2)
    return bool(np.all(d.min(axis=1) <= tol) and np.all(d.min(axis=0) <= tol))


# ---------------------------------------------------------------------------
# OFF serialization
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def dump_off(p: PolytopeV, fh: TextIO) -> None:
    fh.write("OFF\n")
    fh.write(f"{p.n_vertices} {p.n_facets} 0\n")
    for v in p.vertices:
        fh.write(" ".join(_fmt(x) for x in v) + "\n")
    for f in p.facets:
        fh.write("3 " + " ".join(str(int(i)) for i in f) + "\n")


def dumps_off(p: PolytopeV) -> str:
    buf = io.StringIO()
    dump_off(p, buf)
    return buf.getvalue()


def _data_lines(lines: Iterable[str]):
    for line in lines:
        line = line.split("#", 1)[0].strip()
        if line:
            yield line


def loads_off(text: str) -> PolytopeV:
    it = _data_lines(text.splitlines())
    header = next(it)
    if header != "OFF":
        raise ValueError(f"not an OFF file (header {header!r})")
    nv, nf, _ = (int(x) for x in next(it).split())
    verts = [[float(x) for x in next(it).split()] for _ in range(nv)]
    faces = []
    for _ in range(nf):
        parts = [int(x) for x in next(it).split()]
        if parts[0] != 3 or len(parts) != 4:
            raise ValueError(f"only triangular facets are supported, got {parts}")
        faces.append(parts[1:])
    return PolytopeV(np.array(verts).reshape(-1, 3), np.array(faces).reshape(-1, 3))


def write_off(p: PolytopeV, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="ascii") as fh:
        dump_off(p, fh)


def read_off(path: str | os.PathLike) -> PolytopeV:
    with open(path, encoding="ascii") as fh:
        return loads_off(fh.read())
