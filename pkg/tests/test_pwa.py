import numpy as np
import pytest

from partcc.errors import (CombinatorialBlowup, NoActiveRegion,
                           SolverInfeasible)
from partcc.geometry import Box, Polytope
from partcc.harness import ExperimentConfig, build_workbench
from partcc.partition import SampleSet, grid_partition, summarize
from partcc.problems import build_pp, compute_tightening, extract_solution
from partcc.pwa import (PwaModel, StageCost, build_prediction, closed_loop,
                        compile_ocp, enumerate_sequences, lipschitz_constants,
                        prediction_matrices, simulate_step)
from partcc.solver import LpProblem, solve_lp, solve_milp


def scalar_model(A=1.0, B=1.0, C=1.0, m=1):
    modes = [(np.array([[A]]), np.array([[B]]), np.array([[C]]),
              np.zeros(1)) for _ in range(m)]
    whole = Polytope(np.zeros((1, 1)), np.zeros(1))  # all of R
    return PwaModel(modes=modes, regions=[whole] * m,
                    state_set=Box([-100.0], [100.0]),
                    input_set=Box([-1.0], [1.0]))


def example_model():
    cfg = ExperimentConfig.from_dict({})
    return build_workbench(cfg, horizon=5)


class TestEnumerateSequences:
    def test_single_mode(self):
        assert enumerate_sequences(scalar_model(), 3) == [(0, 0, 0)]

    def test_counts(self):
        assert len(enumerate_sequences(scalar_model(m=3), 2)) == 9
        assert len(enumerate_sequences(scalar_model(m=3), 5)) == 243

    def test_lexicographic(self):
        seqs = enumerate_sequences(scalar_model(m=2), 2)
        assert seqs == [(0, 0), (0, 1), (1, 0), (1, 1)]

    def test_cap(self):
        with pytest.raises(CombinatorialBlowup):
            enumerate_sequences(scalar_model(m=3), 4, cap=10)


class TestPredictionMatrices:
    def test_scalar_integrator(self):
        F, G, Gam, v = prediction_matrices(scalar_model(), (0, 0))
        assert np.allclose(F.ravel(), [1, 1, 1])
        assert np.allclose(G, [[0, 0], [1, 0], [1, 1]])
        assert np.allclose(Gam, G)
        assert np.allclose(v, 0)

    def test_zero_offsets(self):
        wb = example_model()
        for seq in [(0, 1, 2), (2, 2, 2)]:
            _, _, _, v = prediction_matrices(wb.model, seq)
            assert np.allclose(v, 0)

    def test_matches_forced_simulation(self):
        rng = np.random.Generator(np.random.Philox(key=43))
        for _ in range(100):
            m = int(rng.integers(1, 4))
            ns, nu, ne = 2, 1, 2
            modes = [(rng.normal(size=(ns, ns)), rng.normal(size=(ns, nu)),
                      rng.normal(size=(ns, ne)), rng.normal(size=ns))
                     for _ in range(m)]
            whole = Polytope(np.zeros((1, ns)), np.zeros(1))
            model = PwaModel(modes=modes, regions=[whole] * m,
                             state_set=Box([-1e6] * ns, [1e6] * ns),
                             input_set=Box([-1.0] * nu, [1.0] * nu))
            N = int(rng.integers(1, 5))
            seq = tuple(rng.integers(0, m, size=N))
            F, G, Gam, v = prediction_matrices(model, seq)
            s0 = rng.normal(size=ns)
            us = rng.normal(size=N * nu)
            etas = rng.normal(size=N * ne)
            stacked = F @ s0 + G @ us + Gam @ etas + v
            s = s0.copy()
            assert np.allclose(stacked[:ns], s, atol=1e-9)
            for k in range(N):
                A, B, C, vv = modes[seq[k]]
                s = (A @ s + B @ us[k * nu:(k + 1) * nu]
                     + C @ etas[k * ne:(k + 1) * ne] + vv)
                assert np.allclose(stacked[(k + 1) * ns:(k + 2) * ns], s,
                                   atol=1e-9)

    def test_block_structure(self):
        wb = example_model()
        seq = (0, 1, 2, 0, 1)
        F, G, Gam, _ = prediction_matrices(wb.model, seq)
        ns = 3
        assert np.allclose(F[:ns], np.eye(ns))
        assert np.allclose(G[:ns], 0)
        assert np.allclose(Gam[:ns], 0)
        # strictly block-lower-triangular in the inputs
        assert np.allclose(G[ns:2 * ns, 1:], 0)


class TestLipschitzConstants:
    def test_example_system_values(self):
        wb = example_model()
        L_eta, L_u = lipschitz_constants(wb.model, wb.prediction, wb.cost, 5)
        assert L_eta == pytest.approx(34.64, rel=0.005)
        assert L_u == pytest.approx(79.69, rel=0.005)

    def test_no_disturbance(self):
        model = scalar_model(C=0.0)
        pred = build_prediction(model, 3)
        L_eta, _ = lipschitz_constants(model, pred, StageCost(np.eye(1),
                                                              np.eye(1)), 3)
        assert L_eta == 0.0

    def test_one_step_scalar(self):
        model = scalar_model(A=0.0, B=1.0, C=1.0)
        pred = build_prediction(model, 1)
        cost = StageCost(Q=np.eye(1), R=np.zeros((1, 1)))
        L_eta, L_u = lipschitz_constants(model, pred, cost, 1)
        assert L_eta == pytest.approx(1.0)
        assert L_u == pytest.approx(1.0)

    def test_soundness_along_branch(self):
        rng = np.random.Generator(np.random.Philox(key=47))
        model = scalar_model(A=0.7, B=1.0, C=0.5)
        N = 4
        pred = build_prediction(model, N)
        cost = StageCost(Q=2 * np.eye(1), R=np.eye(1))
        L_eta, L_u = lipschitz_constants(model, pred, cost, N)
        seq = pred.sequences[0]
        F, G, Gam = pred.F[seq], pred.G[seq], pred.Gam[seq]
        s0 = np.array([1.0])

        def total_cost(us, etas):
            stack = F @ s0 + G @ us + Gam @ etas
            states = stack[1:]
            return (np.abs(2 * states).sum() + np.abs(us).sum())

        for _ in range(1000):
            u = rng.uniform(-1, 1, N)
            e1, e2 = rng.normal(size=(2, N))
            assert abs(total_cost(u, e1) - total_cost(u, e2)) <= (
                L_eta * np.abs(e1 - e2).sum() + 1e-9)
            u2 = rng.uniform(-1, 1, N)
            assert abs(total_cost(u, e1) - total_cost(u2, e1)) <= (
                L_u * np.linalg.norm(u - u2) + 1e-9)


class TestSimulateStep:
    def test_example_active_mode(self):
        wb = example_model()
        s = np.array([1.5, 2.0, 1.0])
        nxt = simulate_step(wb.model, s, np.zeros(1), np.zeros(2))
        A3 = wb.model.modes[2][0]
        assert np.allclose(nxt, A3 @ s)

    def test_boundary_tie_break(self):
        wb = example_model()
        s = np.array([1.0, 0.0, 0.0])
        nxt = simulate_step(wb.model, s, np.zeros(1), np.zeros(2))
        A2 = wb.model.modes[1][0]
        assert np.allclose(nxt, A2 @ s)

    def test_zero_dynamics(self):
        modes = [(np.zeros((1, 1)), np.zeros((1, 1)), np.zeros((1, 1)),
                  np.zeros(1))]
        whole = Polytope(np.zeros((1, 1)), np.zeros(1))
        model = PwaModel(modes=modes, regions=[whole],
                         state_set=Box([-1.0], [1.0]),
                         input_set=Box([-1.0], [1.0]))
        assert simulate_step(model, [5.0], [3.0], [2.0])[0] == 0.0

    def test_no_active_region(self):
        gap = Polytope(np.array([[1.0]]), np.array([-5.0]))  # s <= -5 only
        model = PwaModel(
            modes=[(np.eye(1), np.eye(1), np.eye(1), np.zeros(1))],
            regions=[gap], state_set=Box([-1.0], [1.0]),
            input_set=Box([-1.0], [1.0]))
        with pytest.raises(NoActiveRegion):
            simulate_step(model, [0.0], [0.0], [0.0])


class TestCompileOcp:
    def test_branch_pruning_by_initial_state(self):
        wb = example_model()
        system = compile_ocp(wb.model, wb.prediction, wb.cost,
                             np.array([1.5, 2.0, 1.0]))
        # s1 = 1.5 forces the first mode, and since neither the input nor
        # the disturbance reaches the first coordinate in one step, the
        # second mode is fixed too: 3 free choices remain out of 5
        assert system.Z == 3 ** 3

    def test_input_box_is_decision_box(self):
        wb = example_model()
        system = compile_ocp(wb.model, wb.prediction, wb.cost,
                             np.array([1.5, 2.0, 1.0]))
        assert system.n == 5
        assert np.allclose(system.decision_box.lo, -0.7)
        assert np.allclose(system.decision_box.hi, 0.7)

    def test_deterministic_single_mode_matches_direct_lp(self):
        """With zero disturbance influence, the compiled PP equals the
        classic condensed MPC program solved directly as an LP."""
        A, B = 0.5, 1.0
        model = scalar_model(A=A, B=B, C=0.0)
        N = 2
        pred = build_prediction(model, N)
        cost = StageCost(Q=np.eye(1), R=np.eye(1))
        s0 = np.array([2.0])
        system = compile_ocp(model, pred, cost, s0)
        domain = Box([-1.0, -1.0], [1.0, 1.0])
        part = summarize(grid_partition(domain, 1),
                         SampleSet(np.zeros((2, 2))), domain=domain)
        tight = compute_tightening(system, part)
        sol = solve_milp(build_pp(system, part, tight, 0.0))

        # direct epigraph LP over (u0, u1, e1, e2, f0, f1):
        # s1 = A s0 + B u0, s2 = A s1 + B u1; min e1+e2+f0+f1
        c = np.array([0, 0, 1, 1, 1, 1.0])
        A_ub = np.array([
            [B, 0, -1, 0, 0, 0],     # s1 <= e1
            [-B, 0, -1, 0, 0, 0],
            [A * B, B, 0, -1, 0, 0],  # s2 <= e2
            [-A * B, -B, 0, -1, 0, 0],
            [1, 0, 0, 0, -1, 0],     # |u0| <= f0
            [-1, 0, 0, 0, -1, 0],
            [0, 1, 0, 0, 0, -1],
            [0, -1, 0, 0, 0, -1],
        ])
        b_ub = np.array([-A * 2.0, A * 2.0, -A * A * 2.0, A * A * 2.0,
                         0, 0, 0, 0])
        lb = np.array([-1, -1, 0, 0, 0, 0.0])
        ub = np.array([1, 1, np.inf, np.inf, np.inf, np.inf])
        direct = solve_lp(LpProblem(c=c, A_ub=A_ub, b_ub=b_ub, lb=lb, ub=ub))
        assert sol.objective == pytest.approx(direct.value, abs=1e-6)

    def test_far_initial_state_prunes_same_way(self):
        wb = example_model()
        region_free = np.array([10.0, 0.0, 0.0])  # s1 = 10: only region 3
        system = compile_ocp(wb.model, wb.prediction, wb.cost, region_free)
        assert system.Z == 3 ** 3


class TestClosedLoop:
    def test_deterministic_rollout_decreases_cost(self):
        model = scalar_model(A=0.5, B=1.0, C=1.0)
        cost = StageCost(Q=np.eye(1), R=0.1 * np.eye(1))

        def controller(s, t, rng):
            return np.clip(-0.5 * s, -1.0, 1.0)

        rec = closed_loop(model, controller, np.array([4.0]), 10, cost,
                          disturbance=lambda rng: np.zeros(1), seed=0)
        assert rec.stage_costs[-1] < rec.stage_costs[0]
        assert len(rec.states) == 11
        assert len(rec.inputs) == 10
        assert rec.infeasible_steps == []

    def test_seed_reproducibility(self):
        model = scalar_model(A=0.5, B=1.0, C=1.0)
        cost = StageCost(Q=np.eye(1), R=np.eye(1))

        def controller(s, t, rng):
            return np.clip(-0.4 * s + 0.01 * rng.normal(), -1, 1)

        runs = [closed_loop(model, controller, np.array([1.0]), 8, cost,
                            disturbance=lambda rng: 0.1 * rng.normal(size=1),
                            seed=5) for _ in range(2)]
        assert np.array_equal(runs[0].states, runs[1].states)
        assert np.array_equal(runs[0].stage_costs, runs[1].stage_costs)

    def test_infeasible_step_falls_back(self):
        model = scalar_model(A=1.0, B=1.0, C=0.0)
        cost = StageCost(Q=np.eye(1), R=np.eye(1))
        calls = []

        def controller(s, t, rng):
            calls.append(t)
            if t == 1:
                raise SolverInfeasible("forced")
            return np.array([0.25])

        rec = closed_loop(model, controller, np.array([0.0]), 3, cost,
                          disturbance=lambda rng: np.zeros(1), seed=0)
        assert rec.infeasible_steps == [1]
        assert rec.inputs[1][0] == pytest.approx(0.25)  # held previous input
