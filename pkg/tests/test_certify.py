import math
from itertools import combinations

import numpy as np
import pytest

from partcc.certify import (BoundContext, RiskSpec, analytic_gap,
                            concentration_constants,
                            delta_continuity_interval, monte_carlo_violation,
                            optimize_r, partition_roughness,
                            performance_interval, required_samples,
                            subset_discrepancy)
from partcc.errors import (DegenerateEpsilon, NotAProbabilityVector,
                           OrderingViolated)
from partcc.geometry import Box
from partcc.partition import SampleSet, grid_partition, summarize


class TestRequiredSamples:
    def test_reference_scale_value(self):
        # (20 ln2 + ln 1e4) / (2 * 0.05^2) = 4614.66..., ceil
        assert required_samples(20, 0.05, 1e-4) == 4615

    def test_degenerate_floor(self):
        assert required_samples(1, 1.0, 1.0) == 1

    def test_monotone_in_k(self):
        prev = 0
        for K in range(1, 30):
            n = required_samples(K, 0.1, 0.01)
            assert n >= prev
            prev = n

    def test_matches_formula(self):
        for K, delta, beta in [(5, 0.1, 0.01), (8, 0.05, 1e-4), (3, 0.2, 0.5)]:
            raw = (K * math.log(2) + math.log(1 / beta)) / (2 * delta ** 2)
            n = required_samples(K, delta, beta)
            assert n - 1 < raw <= n


class TestSubsetDiscrepancy:
    def test_equal_vectors(self):
        assert subset_discrepancy([0.5, 0.5], [0.5, 0.5]) == 0.0

    def test_two_cells(self):
        assert subset_discrepancy([0.5, 0.5], [0.6, 0.4]) == pytest.approx(0.1)

    def test_three_cells(self):
        assert subset_discrepancy([0.2, 0.3, 0.5],
                                  [0.3, 0.3, 0.4]) == pytest.approx(0.1)

    def test_equals_bruteforce_enumeration(self):
        rng = np.random.Generator(np.random.Philox(key=13))
        for _ in range(30):
            K = int(rng.integers(2, 9))
            p = rng.random(K)
            p /= p.sum()
            q = rng.random(K)
            q /= q.sum()
            brute = 0.0
            for size in range(K + 1):
                for subset in combinations(range(K), size):
                    diff = abs(sum(p[j] - q[j] for j in subset))
                    brute = max(brute, diff)
            assert subset_discrepancy(p, q) == pytest.approx(brute, abs=1e-12)

    def test_rejects_non_probability(self):
        with pytest.raises(NotAProbabilityVector):
            subset_discrepancy([0.5, 0.6], [0.5, 0.5])
        with pytest.raises(NotAProbabilityVector):
            subset_discrepancy([0.5, 0.5], [0.5, 0.5, 0.0])


class TestConcentration:
    def test_c1_hand_value(self):
        ctx = BoundContext(L_theta=1, L_x=1, q=1, D=1, R=1, n=1, r=1,)
        c1, _ = concentration_constants(ctx, 200, beta=math.exp(-1))
        assert c1 == pytest.approx(math.sqrt((1 + math.log(3)) / 400),
                                   abs=1e-9)

    def test_c2_formula(self):
        ctx = BoundContext(L_theta=1, L_x=2, q=1, D=1, R=1, n=1, r=0.1)
        _, c2 = concentration_constants(ctx, 10, beta=0.5)
        assert c2 == pytest.approx(0.4)

    def test_c1_quarters_with_4n(self):
        ctx = BoundContext(L_theta=3, L_x=1, q=2, D=2, R=1, n=4, r=0.3)
        a, _ = concentration_constants(ctx, 100, beta=0.01)
        b, _ = concentration_constants(ctx, 400, beta=0.01)
        assert b == pytest.approx(a / 2)

    def test_optimize_r_beats_endpoints(self):
        args = dict(L_theta=34.6, L_x=79.7, D=3.0, R=2.0, n=3, N=3000,
                    beta=1e-4)
        r = optimize_r(**args)
        assert 0 < r <= args["R"]

        def total(rv):
            ctx = BoundContext(L_theta=args["L_theta"], L_x=args["L_x"], q=1,
                               D=args["D"], R=args["R"], n=args["n"], r=rv)
            c1, c2 = concentration_constants(ctx, args["N"], args["beta"])
            return c1 + c2

        assert total(r) <= total(args["R"]) + 1e-9
        assert total(r) <= total(args["R"] / 100) + 1e-9


class TestPartitionRoughness:
    def test_zero_when_samples_at_representative(self):
        d = Box([0.0], [1.0])
        ss = SampleSet(np.full((4, 1), 0.5))
        part = summarize([d], ss, domain=d)
        assert partition_roughness(part, ss, L_theta=2.0) == 0.0

    def test_hand_value(self):
        d = Box([-1.0], [1.0])
        ss = SampleSet(np.array([[-1.0], [1.0]]))
        part = summarize([d], ss, domain=d)
        assert partition_roughness(part, ss, L_theta=1.0, q=1) == pytest.approx(1.0)

    def test_refinement_does_not_increase(self):
        d = Box([-1.0], [1.0])
        ss = SampleSet(np.array([[-1.0], [1.0]]))
        coarse = summarize(grid_partition(d, 1), ss, domain=d)
        fine = summarize(grid_partition(d, 2), ss, domain=d)
        c_coarse = partition_roughness(coarse, ss, 1.0)
        c_fine = partition_roughness(fine, ss, 1.0)
        assert c_fine <= c_coarse
        assert c_fine == pytest.approx(0.0)


class TestPerformanceInterval:
    def test_symmetric(self):
        iv = performance_interval(5.0, 5.0, 0.5, 0.25, 0.25, beta=0.01)
        assert (iv.lower, iv.upper) == (4.0, 6.0)
        assert iv.confidence == pytest.approx(0.97)
        assert iv.contains(5.0)

    def test_c_zero(self):
        iv = performance_interval(7.0, 3.0, 0.0, 0.0, 0.0, beta=0.1)
        assert (iv.lower, iv.upper) == (3.0, 7.0)

    def test_ordering_violation(self):
        with pytest.raises(OrderingViolated):
            performance_interval(3.0, 7.0, 0.1, 0.1, 0.1, beta=0.1)


class TestDeltaContinuity:
    def test_three_masses(self):
        lo, hi = delta_continuity_interval([0.2, 0.3, 0.5], 0.15)
        assert lo == 0.0
        assert hi == pytest.approx(0.05)

    def test_single_cell(self):
        _, hi = delta_continuity_interval([1.0], 0.5)
        assert hi == pytest.approx(0.5)

    def test_degenerate(self):
        with pytest.raises(DegenerateEpsilon):
            delta_continuity_interval([0.5, 0.5], 0.5)


class TestAnalyticGap:
    def test_one_dimensional_equals_interval_hausdorff(self):
        # tightened [lo, b - tau] vs relaxed [lo, b + gamma]: distance tau+gamma
        gap = analytic_gap({(0, 0): np.array([0.2])},
                           {(0, 0): np.array([0.3])},
                           [np.array([[1.0]])], L_x=1.0)
        assert gap == pytest.approx(0.5)

    def test_zero_slacks(self):
        gap = analytic_gap({(0, 0): np.zeros(2)}, {(0, 0): np.zeros(2)},
                           [np.eye(2)], L_x=3.0)
        assert gap == 0.0

    def test_scales_with_lipschitz(self):
        tau = {(0, 0): np.array([0.1, 0.2])}
        gam = {(0, 0): np.array([0.0, 0.1])}
        C = [np.eye(2)]
        assert analytic_gap(tau, gam, C, 2.0) == pytest.approx(
            2.0 * analytic_gap(tau, gam, C, 1.0))


class DummySystem:
    def __init__(self, branches):
        self.branches = branches


class TestMonteCarloViolation:
    def test_always_satisfied(self):
        sys_ = DummySystem([(np.zeros((1, 1)), np.zeros((1, 1)),
                             np.array([-1.0]))])
        v = monte_carlo_violation(np.zeros(1), sys_,
                                  lambda rng, M: rng.random((M, 1)), 100, 0)
        assert v == 0.0

    def test_half_space_uniform(self):
        # branch: theta <= 0, theta ~ U[-1, 1]
        sys_ = DummySystem([(np.zeros((1, 1)), np.eye(1), np.zeros(1))])
        v = monte_carlo_violation(np.zeros(1), sys_,
                                  lambda rng, M: rng.uniform(-1, 1, (M, 1)),
                                  100_000, seed=42)
        assert v == pytest.approx(0.5, abs=0.01)

    def test_deterministic(self):
        sys_ = DummySystem([(np.zeros((1, 1)), np.eye(1), np.zeros(1))])
        args = (np.zeros(1), sys_,
                lambda rng, M: rng.uniform(-1, 1, (M, 1)), 1000, 7)
        assert monte_carlo_violation(*args) == monte_carlo_violation(*args)

    def test_disjunction_uses_best_branch(self):
        # two branches covering complementary half-lines: never violated
        sys_ = DummySystem([(np.zeros((1, 1)), np.eye(1), np.zeros(1)),
                            (np.zeros((1, 1)), -np.eye(1), np.zeros(1))])
        v = monte_carlo_violation(np.zeros(1), sys_,
                                  lambda rng, M: rng.uniform(-1, 1, (M, 1)),
                                  5000, seed=1)
        assert v == 0.0


class TestRiskSpec:
    def test_validation(self):
        RiskSpec(epsilon=0.15, delta=0.05, beta=1e-4)
        with pytest.raises(ValueError):
            RiskSpec(epsilon=0.1, delta=0.2, beta=0.01)
        with pytest.raises(ValueError):
            RiskSpec(epsilon=0.1, delta=0.05, beta=0.0)
