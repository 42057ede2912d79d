"""Statistical and analytic guarantees: sample complexity, uniform
concentration constants, performance intervals, the subset-sum continuity
interval for the risk level, the singular-value optimality-gap bound, and
Monte Carlo validation of constraint violation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (CombinatorialBlowup, DegenerateEpsilon,
                     NotAProbabilityVector, OrderingViolated)
from .geometry import sigma_constant


@dataclass(frozen=True)
class RiskSpec:
    """Risk level, estimation accuracy, and confidence parameters."""

    epsilon: float
    delta: float
    beta: float

    def __post_init__(self):
        if not 0 < self.delta <= self.epsilon < 1:
            raise ValueError("requires 0 < delta <= epsilon < 1")
        if not 0 < self.beta <= 1:
            raise ValueError("requires 0 < beta <= 1")


@dataclass(frozen=True)
class BoundContext:
    """Constants entering the concentration bound.

    L_theta: Lipschitz constant of the cost in theta (q-norm);
    L_x: Lipschitz constant in the decision (2-norm);
    D: diameter of the uncertainty superset in the q-norm;
    R: diameter of the decision set in the 2-norm;
    n: number of decision variables; r: covering radius in (0, R].
    """

    L_theta: float
    L_x: float
    q: float
    D: float
    R: float
    n: int
    r: float

    def __post_init__(self):
        if min(self.L_theta, self.L_x, self.D, self.R, self.r) <= 0:
            raise ValueError("all constants must be strictly positive")
        if self.r > self.R + 1e-12:
            raise ValueError("requires r <= R")


@dataclass(frozen=True)
class PerformanceInterval:
    lower: float
    upper: float
    c1: float
    c2: float
    c3: float
    confidence: float

    @property
    def c(self) -> float:
        return self.c1 + self.c2 + self.c3

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


def required_samples(K: int, delta: float, beta: float) -> int:
    """Smallest N with N >= (K log 2 + log(1/beta)) / (2 delta^2)."""
    if not 0 < delta <= 1:
        raise ValueError("delta must be in (0,1]")
    if not 0 < beta <= 1:
        raise ValueError("beta must be in (0,1]")
    raw = (K * math.log(2.0) + math.log(1.0 / beta)) / (2.0 * delta ** 2)
    return max(1, math.ceil(raw - 1e-12))


def subset_discrepancy(p_true, p_hat, tol: float = 1e-12) -> float:
    """max over index subsets of |sum of (p - p_hat)| = half the L1 distance."""
    p = np.asarray(p_true, dtype=float)
    q = np.asarray(p_hat, dtype=float)
    if p.shape != q.shape:
        raise NotAProbabilityVector("length mismatch")
    for v in (p, q):
        if np.any(v < -tol) or abs(v.sum() - 1.0) > max(tol, 1e-12):
            raise NotAProbabilityVector("entries must be >= 0 and sum to 1")
    return 0.5 * float(np.abs(p - q).sum())


def concentration_constants(ctx: BoundContext, N: int, beta: float) -> tuple[float, float]:
    """c1 = sqrt(L_theta^2 D^2 / (2N) (log(1/beta) + n log(3R/r))), c2 = 2 L_x r."""
    if N < 1:
        raise ValueError("N must be >= 1")
    c1 = math.sqrt(ctx.L_theta ** 2 * ctx.D ** 2 / (2.0 * N)
                   * (math.log(1.0 / beta) + ctx.n * math.log(3.0 * ctx.R / ctx.r)))
    c2 = 2.0 * ctx.L_x * ctx.r
    return c1, c2


def optimize_r(L_theta: float, L_x: float, D: float, R: float, n: int,
               N: int, beta: float, tol_factor: float = 1e-6) -> float:
    """Covering radius minimizing c1 + c2 over (0, R] by golden section."""
    phi = (math.sqrt(5.0) - 1.0) / 2.0

    def total(r: float) -> float:
        ctx = BoundContext(L_theta=L_theta, L_x=L_x, q=1, D=D, R=R, n=n, r=r)
        c1, c2 = concentration_constants(ctx, N, beta)
        return c1 + c2

    lo, hi = 1e-12 * R, R
    a, b = lo, hi
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, fd = total(c), total(d)
    while b - a > tol_factor * R:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = total(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = total(d)
    return 0.5 * (a + b)


def partition_roughness(partition, samples, L_theta: float, q: float = 1) -> float:
    """c3 = (1/N) sum_j sum_{i in cell j} L_theta ||rep_j - theta_i||_q."""
    total = 0.0
    for cell in partition.cells:
        if len(cell.members) == 0:
            continue
        diffs = samples.samples[cell.members] - cell.representative
        total += L_theta * np.linalg.norm(diffs, ord=q, axis=1).sum()
    return total / samples.n


def performance_interval(J_pp: float, J_rp: float, c1: float, c2: float,
                         c3: float, beta: float,
                         tol: float = 1e-6) -> PerformanceInterval:
    """[J_rp - c, J_pp + c] with c = c1 + c2 + c3, confidence 1 - 3 beta."""
    if J_rp > J_pp + tol * max(1.0, abs(J_pp)):
        raise OrderingViolated(
            f"J_rp={J_rp} > J_pp={J_pp}: set inclusion violated")
    c = c1 + c2 + c3
    return PerformanceInterval(lower=J_rp - c, upper=J_pp + c,
                               c1=c1, c2=c2, c3=c3, confidence=1.0 - 3.0 * beta)


def delta_continuity_interval(masses, epsilon: float, K_cap: int = 24,
                              tol: float = 1e-12) -> tuple[float, float]:
    """Open interval (0, min over proper subsets |eps - subset mass|) in
    which the optimal value is insensitive to the risk perturbation."""
    p = np.asarray(masses, dtype=float)
    K = len(p)
    if K > K_cap:
        raise CombinatorialBlowup(f"K={K} exceeds subset-enumeration cap {K_cap}")
    best = np.inf
    for code in range(2 ** K - 1):  # proper subsets only
        s = sum(p[j] for j in range(K) if (code >> j) & 1)
        gap = abs(epsilon - s)
        if gap <= tol:
            raise DegenerateEpsilon(
                f"epsilon={epsilon} equals a proper-subset mass sum")
        best = min(best, gap)
    return 0.0, float(best)


def analytic_gap(tau: dict, gamma: dict, C_by_branch: list[np.ndarray],
                 L_x: float) -> float:
    """Worst-case optimality-gap bound L_x max_{j,h} ||tau + gamma||_2 / sigma(C_h).

    tau and gamma map (cell j, branch h) to nonnegative row-slack vectors;
    the tightened and relaxed sets differ row-wise by tau + gamma, so the
    vertex displacement is bounded by that magnitude over sigma(C_h).
    """
    sigmas = [sigma_constant(C) for C in C_by_branch]
    worst = 0.0
    for (j, h), t in tau.items():
        g = gamma[(j, h)]
        worst = max(worst, float(np.linalg.norm(np.asarray(t) + np.asarray(g)))
                    / sigmas[h])
    return L_x * worst


def monte_carlo_violation(x: np.ndarray, system, sampler, M: int,
                          seed: int) -> float:
    """Fraction of M fresh samples for which no branch is satisfied.

    ``sampler(rng, M)`` must return an M x n_theta matrix; the counter-based
    generator makes the estimate deterministic given the seed.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=seed))
    thetas = np.atleast_2d(np.asarray(sampler(rng, M), dtype=float))
    x = np.asarray(x, dtype=float)
    satisfied = np.zeros(thetas.shape[0], dtype=bool)
    for C_h, D_h, b_h in system.branches:
        rows = (C_h @ x + b_h)[:, None] + D_h @ thetas.T
        satisfied |= np.all(rows <= 0.0, axis=0)
    return float((~satisfied).mean())
