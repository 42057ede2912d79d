"""Polytopes, boxes, linear maximization, 2-D vertex enumeration, an exact
Hausdorff oracle for low-dimensional validation, and the submatrix
singular-value constant used by the analytic optimality-gap bound."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np

from .errors import (CombinatorialBlowup, DimensionUnsupported, EmptySet,
                     Infeasible, NoInvertibleSubmatrix, Unbounded)
from .solver import LpProblem, solve_lp

TOL = 1e-9


@dataclass(frozen=True)
class Polytope:
    """Half-space representation {x : A x <= b}."""

    A: np.ndarray
    b: np.ndarray
    _nonempty: bool | None = field(default=None, compare=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if A.shape[0] != b.shape[0]:
            raise ValueError("row count of A must equal length of b")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def contains(self, x: np.ndarray, tol: float = TOL) -> bool:
        return bool(np.all(self.A @ np.asarray(x, dtype=float) <= self.b + tol))

    def is_empty(self) -> bool:
        """One LP feasibility solve; result cached on first call."""
        if self._nonempty is not None:
            return not self._nonempty
        try:
            solve_lp(LpProblem(c=np.zeros(self.dim), A_ub=self.A, b_ub=self.b))
            empty = False
        except Infeasible:
            empty = True
        except Unbounded:
            empty = False
        object.__setattr__(self, "_nonempty", not empty)
        return empty

    def chebyshev_center(self) -> np.ndarray:
        """Center of the largest inscribed ball (LP)."""
        norms = np.linalg.norm(self.A, axis=1)
        n = self.dim
        # variables (x, r); maximize r
        A_ub = np.hstack([self.A, norms[:, None]])
        c = np.zeros(n + 1)
        c[-1] = -1.0
        lb = np.full(n + 1, -np.inf)
        lb[-1] = 0.0
        res = solve_lp(LpProblem(c=c, A_ub=A_ub, b_ub=self.b, lb=lb))
        return res.x[:n]


@dataclass(frozen=True)
class Box:
    """Axis-aligned box {x : lo <= x <= hi}."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape:
            raise ValueError("lo and hi must have the same shape")
        if np.any(lo > hi):
            raise ValueError("requires lo <= hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return len(self.lo)

    def to_polytope(self) -> Polytope:
        n = self.dim
        eye = np.eye(n)
        return Polytope(np.vstack([eye, -eye]), np.concatenate([self.hi, -self.lo]),
                        _nonempty=True)

    def diameter(self, q: float = 2) -> float:
        w = self.hi - self.lo
        return float(np.linalg.norm(w, ord=q))

    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    def contains(self, x, tol: float = TOL) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def support(self, c: np.ndarray) -> float:
        """max_{x in box} c'x, closed form."""
        c = np.asarray(c, dtype=float)
        return float(np.sum(np.where(c >= 0, c * self.hi, c * self.lo)))


def linear_max(cell, c: np.ndarray) -> float:
    """max_{theta in cell} c'theta.  Boxes are closed-form; polytopes via LP."""
    c = np.asarray(c, dtype=float)
    if isinstance(cell, Box):
        return cell.support(c)
    res = solve_lp(LpProblem(c=-c, A_ub=cell.A, b_ub=cell.b))
    return -res.value


def vertices_2d(p: Polytope, tol: float = TOL) -> list[np.ndarray]:
    """All vertices of a bounded 1-D or 2-D polytope.

    2-D vertices come from intersecting pairs of constraint lines and
    keeping feasible points; output is counterclockwise around the
    centroid, deduplicated within tolerance.
    """
    if isinstance(p, Box):
        p = p.to_polytope()
    n = p.dim
    if n > 2:
        raise DimensionUnsupported("vertex enumeration limited to 1-D and 2-D")
    if p.is_empty():
        raise EmptySet("empty polytope")
    if n == 1:
        a = p.A[:, 0]
        los = [p.b[i] / a[i] for i in range(len(a)) if a[i] < -tol]
        his = [p.b[i] / a[i] for i in range(len(a)) if a[i] > tol]
        if not los or not his:
            raise Unbounded("1-D polytope unbounded")
        lo, hi = max(los), min(his)
        if hi - lo <= tol:
            return [np.array([0.5 * (lo + hi)])]
        return [np.array([lo]), np.array([hi])]
    pts = []
    m = p.A.shape[0]
    for i, j in combinations(range(m), 2):
        M = p.A[[i, j]]
        if abs(np.linalg.det(M)) < tol:
            continue
        v = np.linalg.solve(M, p.b[[i, j]])
        if p.contains(v, tol=1e-7):
            pts.append(v)
    if not pts:
        raise Unbounded("2-D polytope has no vertices (unbounded)")
    uniq: list[np.ndarray] = []
    for v in pts:
        if not any(np.linalg.norm(v - u) <= max(tol, 1e-9) for u in uniq):
            uniq.append(v)
    centroid = np.mean(uniq, axis=0)
    uniq.sort(key=lambda v: np.arctan2(v[1] - centroid[1], v[0] - centroid[0]))
    return uniq


def _point_segment_dist(x: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    d = b - a
    L2 = float(d @ d)
    if L2 <= TOL ** 2:
        return float(np.linalg.norm(x - a))
    t = np.clip(float((x - a) @ d) / L2, 0.0, 1.0)
    return float(np.linalg.norm(x - (a + t * d)))


def point_to_polytope_dist(x: np.ndarray, p: Polytope) -> float:
    """Euclidean distance from a point to a bounded 1-D/2-D polytope."""
    if p.contains(x, tol=TOL):
        return 0.0
    verts = vertices_2d(p)
    if p.dim == 1:
        return float(min(abs(x[0] - v[0]) for v in verts))
    if len(verts) == 1:
        return float(np.linalg.norm(x - verts[0]))
    k = len(verts)
    return min(_point_segment_dist(x, verts[i], verts[(i + 1) % k])
               for i in range(k))


def _as_pieces(s) -> list[Polytope]:
    if isinstance(s, (Polytope, Box)):
        s = [s]
    out = []
    for p in s:
        if isinstance(p, Box):
            p = p.to_polytope()
        if p.is_empty():
            raise EmptySet("Hausdorff oracle requires non-empty pieces")
        out.append(p)
    return out


def _max_min_dist_on_segment(a: np.ndarray, b: np.ndarray,
                             dst: list[Polytope], grid: int = 1024) -> float:
    """max over the segment [a, b] of the distance to the union of dst.

    The distance to each convex piece is convex along the segment; their
    pointwise minimum can peak in the interior (where the nearest piece
    switches), so the maximum is bracketed on a grid and refined by
    golden-section search.
    """
    def f(t: float) -> float:
        x = a + t * (b - a)
        return min(point_to_polytope_dist(x, q) for q in dst)

    ts = np.linspace(0.0, 1.0, grid + 1)
    vals = [f(t) for t in ts]
    i = int(np.argmax(vals))
    lo = ts[max(i - 1, 0)]
    hi = ts[min(i + 1, grid)]
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    c = hi - phi * (hi - lo)
    d = lo + phi * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > 1e-12:
        if fc > fd:
            hi, d, fd = d, c, fc
            c = hi - phi * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + phi * (hi - lo)
            fd = f(d)
    return max(vals[i], fc, fd)


def hausdorff_exact(A, B) -> float:
    """Two-sided Hausdorff distance between unions of bounded polytopes.

    Validation oracle for dimension <= 2.  Against a convex destination
    the directed distance is the max over source vertices (the distance
    function is convex).  Against a union the peak can sit inside a source
    edge, so each edge is line-searched as well.
    """
    pa, pb = _as_pieces(A), _as_pieces(B)
    if any(p.dim > 2 for p in pa + pb):
        raise DimensionUnsupported("exact Hausdorff limited to dimension <= 2")

    def directed(src: list[Polytope], dst: list[Polytope]) -> float:
        worst = 0.0
        for p in src:
            verts = vertices_2d(p)
            for v in verts:
                worst = max(worst, min(point_to_polytope_dist(v, q) for q in dst))
            if len(dst) > 1 and len(verts) > 1:
                k = len(verts)
                edges = ([(verts[0], verts[1])] if k == 2 else
                         [(verts[i], verts[(i + 1) % k]) for i in range(k)])
                for a, b in edges:
                    worst = max(worst, _max_min_dist_on_segment(a, b, dst))
        return worst

    return max(directed(pa, pb), directed(pb, pa))


SIGMA_COMB_CAP = 50_000


def sigma_constant(C: np.ndarray, comb_cap: int = SIGMA_COMB_CAP,
                   tol: float = TOL) -> float:
    """Minimum over invertible n x n row-submatrices of C of the smallest
    singular value (smallest singular value via eigenvalues of G'G)."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    m, n = C.shape
    if m < n:
        raise NoInvertibleSubmatrix("fewer rows than columns")
    if comb(m, n) > comb_cap:
        raise CombinatorialBlowup(
            f"C({m},{n}) = {comb(m, n)} exceeds cap {comb_cap}")
    best = np.inf
    for rows in combinations(range(m), n):
        G = C[list(rows)]
        if abs(np.linalg.det(G)) < tol:
            continue
        eigs = np.linalg.eigvalsh(G.T @ G)
        best = min(best, float(np.sqrt(max(eigs[0], 0.0))))
    if not np.isfinite(best):
        raise NoInvertibleSubmatrix("all square row-submatrices are singular")
    return best
