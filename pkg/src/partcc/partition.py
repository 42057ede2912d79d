"""Partitioning of the uncertainty superset from i.i.d. samples.

Three region constructions (iterative gridding, k-means + Voronoi,
adaptive splitting of selected coordinates) plus the summarization step
that attaches empirical masses and representatives to the regions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateClustering, Infeasible, SampleOutsideDomain
from .geometry import Box, Polytope
from .solver import LpProblem, solve_lp

INTERIOR_MARGIN = 1e-9


@dataclass(frozen=True)
class SampleSet:
    """N x n_theta matrix of uncertainty realizations plus the seed that
    produced (or ingested) them."""

    samples: np.ndarray
    seed: int = 0

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.samples, dtype=float))
        if s.shape[0] < 1:
            raise ValueError("need at least one sample")
        object.__setattr__(self, "samples", s)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def count_outside(self, domain: Box, tol: float = 1e-12) -> int:
        inside = np.all((self.samples >= domain.lo - tol)
                        & (self.samples <= domain.hi + tol), axis=1)
        return int((~inside).sum())


@dataclass(frozen=True)
class PartitionCell:
    region: Box | Polytope
    representative: np.ndarray
    mass: float
    members: np.ndarray  # sample indices (0-based)


@dataclass(frozen=True)
class Partition:
    domain: Box
    cells: list[PartitionCell]
    n_samples: int

    @property
    def K(self) -> int:
        return len(self.cells)

    @property
    def masses(self) -> np.ndarray:
        return np.array([c.mass for c in self.cells])

    @property
    def representatives(self) -> np.ndarray:
        return np.array([c.representative for c in self.cells])

    def validate_disjoint_interiors(self, margin: float = INTERIOR_MARGIN) -> bool:
        """Pairwise check that cell interiors do not overlap.

        Box pairs use exact interval arithmetic; general pairs maximize the
        interior depth (largest inscribed ball of the intersection) by LP
        and compare it against the margin, which keeps the test meaningful
        above the LP feasibility tolerance.
        """
        regions = [c.region for c in self.cells]
        for i in range(len(regions)):
            for j in range(i + 1, len(regions)):
                a, b = regions[i], regions[j]
                if isinstance(a, Box) and isinstance(b, Box):
                    depth = np.min(np.minimum(a.hi, b.hi)
                                   - np.maximum(a.lo, b.lo))
                    if depth > margin:
                        return False
                    continue
                pa = a.to_polytope() if isinstance(a, Box) else a
                pb = b.to_polytope() if isinstance(b, Box) else b
                A = np.vstack([pa.A, pb.A])
                rhs = np.concatenate([pa.b, pb.b])
                norms = np.linalg.norm(A, axis=1)
                n = A.shape[1]
                c = np.zeros(n + 1)
                c[-1] = -1.0  # maximize depth t
                ub = np.full(n + 1, np.inf)
                ub[-1] = 1e6
                try:
                    res = solve_lp(LpProblem(
                        c=c, A_ub=np.hstack([A, norms[:, None]]), b_ub=rhs,
                        ub=ub))
                except Infeasible:
                    continue
                if -res.value > margin:
                    return False
        return True


def _split_longest(cells: list[Box], K: int, dims: list[int]) -> list[Box]:
    """Iteratively halve the longest edge (restricted to ``dims``) among all
    cells until K cells exist.  Ties: lowest dimension index, then lowest
    cell creation order (list position)."""
    cells = list(cells)
    while len(cells) < K:
        best = None  # (-length, cell_idx, dim)
        for ci, cell in enumerate(cells):
            w = cell.hi - cell.lo
            for d in dims:
                key = (-w[d], ci, d)
                if best is None or key < best:
                    best = key
        _, ci, d = best
        cell = cells[ci]
        mid = 0.5 * (cell.lo[d] + cell.hi[d])
        lo_hi = cell.hi.copy()
        lo_hi[d] = mid
        hi_lo = cell.lo.copy()
        hi_lo[d] = mid
        cells[ci] = Box(cell.lo, lo_hi)
        cells.append(Box(hi_lo, cell.hi))
    return cells


def grid_partition(domain: Box, K: int) -> list[Box]:
    """K axis-aligned boxes from iterative longest-edge halving."""
    if K < 1:
        raise ValueError("K must be >= 1")
    return _split_longest([domain], K, list(range(domain.dim)))


def adaptive_split(domain: Box, critical_coords, K: int) -> list[Box]:
    """Longest-edge halving restricted to the flagged coordinates; the
    remaining dimensions are never split."""
    dims = sorted(int(d) for d in critical_coords)
    if not dims:
        raise ValueError("critical_coords must be nonempty")
    if K < 1:
        raise ValueError("K must be >= 1")
    return _split_longest([domain], K, dims)


def kmeans(points: np.ndarray, K: int, seed: int, max_iter: int = 100,
           tol: float = 1e-8) -> np.ndarray:
    """Lloyd's algorithm with seeded init from K distinct sample points."""
    distinct = np.unique(points, axis=0)
    if distinct.shape[0] < K:
        raise DegenerateClustering(
            f"only {distinct.shape[0]} distinct points for K={K}")
    rng = np.random.Generator(np.random.Philox(key=seed))
    pick = rng.choice(distinct.shape[0], size=K, replace=False)
    centroids = distinct[np.sort(pick)].copy()
    for _ in range(max_iter):
        d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        labels = np.argmin(d2, axis=1)
        new = centroids.copy()
        for k in range(K):
            mask = labels == k
            if mask.any():
                new[k] = points[mask].mean(axis=0)
        if np.max(np.linalg.norm(new - centroids, axis=1)) <= tol:
            centroids = new
            break
        centroids = new
    return centroids


def voronoi_partition(domain: Box, samples: SampleSet, K: int,
                      seed: int | None = None) -> list[Polytope]:
    """Voronoi cells of k-means centroids, intersected with the domain box.

    Cell j is {theta : 2(c_i - c_j)'theta <= |c_i|^2 - |c_j|^2, for all i}
    within the domain.
    """
    if samples.n < K:
        raise ValueError("need at least K samples")
    if seed is None:
        seed = samples.seed
    if K == 1:
        return [domain.to_polytope()]
    centroids = kmeans(samples.samples, K, seed)
    box = domain.to_polytope()
    cells = []
    for j in range(K):
        rows, rhs = [box.A], [box.b]
        for i in range(K):
            if i == j:
                continue
            rows.append(2.0 * (centroids[i] - centroids[j])[None, :])
            rhs.append(np.array([centroids[i] @ centroids[i]
                                 - centroids[j] @ centroids[j]]))
        cells.append(Polytope(np.vstack(rows), np.concatenate(rhs)))
    return cells


def _cell_contains(region, x, tol: float) -> bool:
    return region.contains(x, tol=tol)


def summarize(regions, samples: SampleSet, tol: float = 1e-9,
              domain: Box | None = None) -> Partition:
    """Attach masses, member lists, and mean representatives to regions.

    Samples exactly on a shared boundary go to the lowest-index cell.
    Empty cells keep mass 0 with the Chebyshev center as representative.
    """
    if domain is None:
        domain = _bounding_box(regions)
    members: list[list[int]] = [[] for _ in regions]
    for i, theta in enumerate(samples.samples):
        for j, region in enumerate(regions):
            if _cell_contains(region, theta, tol):
                members[j].append(i)
                break
        else:
            raise SampleOutsideDomain(f"sample {i} lies in no cell")
    cells = []
    for j, region in enumerate(regions):
        idx = np.array(members[j], dtype=int)
        mass = len(idx) / samples.n
        if len(idx):
            rep = samples.samples[idx].mean(axis=0)
        elif isinstance(region, Box):
            rep = region.center()
        else:
            rep = region.chebyshev_center()
        cells.append(PartitionCell(region=region, representative=rep,
                                   mass=mass, members=idx))
    return Partition(domain=domain, cells=cells, n_samples=samples.n)


def _bounding_box(regions) -> Box:
    los, his = [], []
    for r in regions:
        if isinstance(r, Box):
            los.append(r.lo)
            his.append(r.hi)
    if los:
        return Box(np.min(los, axis=0), np.max(his, axis=0))
    # Voronoi cells carry the domain box in their first rows; recover it by
    # bounding each coordinate over the first cell's constraint set.
    p = regions[0]
    n = p.dim
    lo = np.full(n, np.inf)
    hi = np.full(n, -np.inf)
    for r in regions:
        for d in range(n):
            c = np.zeros(n)
            c[d] = 1.0
            hi[d] = max(hi[d], -solve_lp(LpProblem(c=-c, A_ub=r.A, b_ub=r.b)).value)
            lo[d] = min(lo[d], solve_lp(LpProblem(c=c, A_ub=r.A, b_ub=r.b)).value)
    return Box(lo, hi)
