"""Piecewise-affine system modeling: mode-sequence enumeration, condensed
prediction matrices over a horizon, compilation of the chance-constrained
optimal control problem into a linear disjunctive constraint system,
Lipschitz constants of the 1-norm stage cost, and closed-loop simulation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np
import scipy.linalg

from .errors import CombinatorialBlowup, NoActiveRegion, SolverInfeasible
from .geometry import Box, Polytope
from .problems import ConstraintSystem, OneNormCost

SEQUENCE_CAP = 100_000


@dataclass(frozen=True)
class PwaModel:
    """s+ = A_l s + B_l u + v_l + C_l eta  when  s is in region l.

    Regions are closed polytopes over the state (the general mixed
    (s, u, eta) region is accepted when its dimension matches) tiling the
    state space with pairwise-disjoint interiors.
    """

    modes: list          # (A_l, B_l, C_l, v_l)
    regions: list        # Polytope per mode
    state_set: Polytope | Box       # chance-constrained state set
    input_set: Box                  # hard input set

    def __post_init__(self):
        if len(self.modes) != len(self.regions):
            raise ValueError("one region per mode required")

    @property
    def m(self) -> int:
        return len(self.modes)

    @property
    def n_s(self) -> int:
        return self.modes[0][0].shape[0]

    @property
    def n_u(self) -> int:
        return self.modes[0][1].shape[1]

    @property
    def n_eta(self) -> int:
        return self.modes[0][2].shape[1]


@dataclass(frozen=True)
class StageCost:
    """l(s, u) = ||Q s||_1 + ||R u||_1 with entrywise-nonnegative Q, R."""

    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        if np.any(self.Q < 0) or np.any(self.R < 0):
            raise ValueError("Q and R entries must be nonnegative")

    def stage(self, s, u) -> float:
        return float(np.abs(self.Q @ s).sum() + np.abs(self.R @ u).sum())


@dataclass(frozen=True)
class PredictionModel:
    """Condensed dynamics per mode sequence:
    stacked_states = F s_t + G u_stack + Gam eta_stack + v_stack,
    with N_pred + 1 state blocks (first block the identity map of s_t)."""

    sequences: list
    F: dict = field(repr=False)
    G: dict = field(repr=False)
    Gam: dict = field(repr=False)
    v: dict = field(repr=False)
    horizon: int = 0


def enumerate_sequences(model: PwaModel, N_pred: int,
                        cap: int = SEQUENCE_CAP) -> list[tuple[int, ...]]:
    """All mode sequences (h_0, ..., h_{N_pred-1}), lexicographic."""
    if model.m ** N_pred > cap:
        raise CombinatorialBlowup(
            f"{model.m}^{N_pred} sequences exceed cap {cap}")
    return list(product(range(model.m), repeat=N_pred))


def prediction_matrices(model: PwaModel, sequence) -> tuple[np.ndarray, ...]:
    """(F, G, Gam, v) for one mode sequence; block-lower-triangular G and
    Gam with a zero first block row, F starting with the identity."""
    ns, nu, ne = model.n_s, model.n_u, model.n_eta
    N = len(sequence)
    F = np.zeros(((N + 1) * ns, ns))
    G = np.zeros(((N + 1) * ns, N * nu))
    Gam = np.zeros(((N + 1) * ns, N * ne))
    v = np.zeros((N + 1) * ns)
    F[:ns] = np.eye(ns)
    for i in range(1, N + 1):
        A_i, B_i, C_i, v_i = model.modes[sequence[i - 1]]
        r = slice(i * ns, (i + 1) * ns)
        p = slice((i - 1) * ns, i * ns)
        F[r] = A_i @ F[p]
        G[r] = A_i @ G[p]
        Gam[r] = A_i @ Gam[p]
        v[r] = A_i @ v[p] + v_i
        G[r, (i - 1) * nu:i * nu] = B_i
        Gam[r, (i - 1) * ne:i * ne] = C_i
    return F, G, Gam, v


def build_prediction(model: PwaModel, N_pred: int,
                     cap: int = SEQUENCE_CAP) -> PredictionModel:
    seqs = enumerate_sequences(model, N_pred, cap)
    F, G, Gam, v = {}, {}, {}, {}
    for seq in seqs:
        F[seq], G[seq], Gam[seq], v[seq] = prediction_matrices(model, seq)
    return PredictionModel(sequences=seqs, F=F, G=G, Gam=Gam, v=v,
                           horizon=N_pred)


def _halfspace(s) -> tuple[np.ndarray, np.ndarray]:
    p = s.to_polytope() if isinstance(s, Box) else s
    return p.A, p.b


def compile_ocp(model: PwaModel, prediction: PredictionModel, cost: StageCost,
                s_t: np.ndarray, risk=None, tol: float = 1e-9) -> ConstraintSystem:
    """Compile the horizon problem at state s_t into a linear disjunctive
    system over the stacked inputs (decision) and disturbances (uncertainty).

    Branch h collects, for its mode sequence, the region rows at steps
    0..N-1 and the state-set rows at steps 1..N, mapped through the
    condensed dynamics.  Sequences whose first region excludes s_t are
    dropped (the current state already decides the first mode).
    """
    ns, nu, ne = model.n_s, model.n_u, model.n_eta
    N = prediction.horizon
    s_t = np.asarray(s_t, dtype=float)
    AS, bS = _halfspace(model.state_set)
    QN = scipy.linalg.block_diag(*([cost.Q] * N))
    RN = scipy.linalg.block_diag(*([cost.R] * N))

    branches = []
    U_list, V_list, u_list = [], [], []
    for seq in prediction.sequences:
        F, G, Gam, v = (prediction.F[seq], prediction.G[seq],
                        prediction.Gam[seq], prediction.v[seq])
        Ar0, br0 = _halfspace(model.regions[seq[0]])
        if np.any(Ar0 @ s_t > br0 + tol):
            continue
        rows_A, rows_rhs = [], []
        for k in range(1, N):
            Ar, br = _halfspace(model.regions[seq[k]])
            sel = np.zeros((ns, (N + 1) * ns))
            sel[:, k * ns:(k + 1) * ns] = np.eye(ns)
            rows_A.append(Ar @ sel)
            rows_rhs.append(br)
        for k in range(1, N + 1):
            sel = np.zeros((ns, (N + 1) * ns))
            sel[:, k * ns:(k + 1) * ns] = np.eye(ns)
            rows_A.append(AS @ sel)
            rows_rhs.append(bS)
        L = np.vstack(rows_A)
        l_rhs = np.concatenate(rows_rhs)
        C_h = L @ G
        D_h = L @ Gam
        b_h = L @ (F @ s_t + v) - l_rhs
        vacuous = (np.all(np.abs(C_h) <= tol, axis=1)
                   & np.all(np.abs(D_h) <= tol, axis=1))
        if np.any(vacuous & (b_h > tol)):
            continue  # constant row already violated: branch is empty
        keep = ~vacuous
        if not keep.any():
            # all rows vacuous: keep one slack row so shapes stay valid
            keep[0] = True
            b_h = b_h.copy()
            b_h[0] = -1.0
        branches.append((C_h[keep], D_h[keep], b_h[keep]))

        tail = slice(ns, (N + 1) * ns)  # predicted states 1..N
        U_list.append(np.vstack([QN @ G[tail], RN]))
        V_list.append(np.vstack([QN @ Gam[tail], np.zeros((N * nu, N * ne))]))
        u_list.append(np.concatenate([QN @ (F @ s_t + v)[tail],
                                      np.zeros(N * nu)]))
    if not branches:
        raise SolverInfeasible(f"no mode sequence admits current state {s_t}")
    lo = np.tile(model.input_set.lo, N)
    hi = np.tile(model.input_set.hi, N)
    return ConstraintSystem(
        branches=branches, decision_box=Box(lo, hi),
        objective=OneNormCost(U=U_list, V=V_list, u=u_list))


def lipschitz_constants(model: PwaModel, prediction: PredictionModel,
                        cost: StageCost, N_pred: int) -> tuple[float, float]:
    """(L_eta, L_u) of the horizon cost; matrix 1-norm = max abs column sum.

    L_eta = ||Q||_1 max_h ||Gam_h||_1;
    L_u = (||Q||_1 max_h ||G_h||_1 + ||R||_1) sqrt(N_pred n_u).
    """
    def one_norm(M):
        return float(np.abs(M).sum(axis=0).max()) if M.size else 0.0

    gmax = max(one_norm(prediction.G[s]) for s in prediction.sequences)
    gam_max = max(one_norm(prediction.Gam[s]) for s in prediction.sequences)
    L_eta = one_norm(cost.Q) * gam_max
    L_u = (one_norm(cost.Q) * gmax + one_norm(cost.R)) * np.sqrt(N_pred * model.n_u)
    return float(L_eta), float(L_u)


def active_mode(model: PwaModel, s, tol: float = 1e-9) -> int:
    """Lowest-index region containing the state."""
    s = np.asarray(s, dtype=float)
    for l, region in enumerate(model.regions):
        A, b = _halfspace(region)
        if np.all(A @ s <= b + tol):
            return l
    raise NoActiveRegion(f"state {s} outside every region")


def simulate_step(model: PwaModel, s, u, eta) -> np.ndarray:
    """One step of the piecewise dynamics; boundary ties resolve to the
    lowest mode index."""
    l = active_mode(model, s)
    A, B, C, v = model.modes[l]
    return (A @ np.asarray(s, dtype=float) + B @ np.atleast_1d(u)
            + v + C @ np.atleast_1d(eta))


@dataclass
class ClosedLoopRecord:
    states: np.ndarray
    inputs: np.ndarray
    stage_costs: np.ndarray
    infeasible_steps: list


def closed_loop(model: PwaModel, controller, s0, T_cl: int, cost: StageCost,
                disturbance, seed: int) -> ClosedLoopRecord:
    """Receding-horizon rollout.

    ``controller(s, t, rng)`` returns the input to apply (first element of
    the optimized sequence); a SolverInfeasible step falls back to the
    previous input and is flagged.  ``disturbance(rng)`` draws the realized
    one-step disturbance.  The per-run generator derives from the seed.
    """
    rng = np.random.Generator(np.random.Philox(
        key=np.random.SeedSequence(entropy=seed).generate_state(2, np.uint64)))
    s = np.asarray(s0, dtype=float)
    states = [s.copy()]
    inputs, costs, infeasible = [], [], []
    u_prev = np.zeros(model.n_u)
    for t in range(T_cl):
        try:
            u = np.atleast_1d(controller(s, t, rng))
        except SolverInfeasible:
            u = u_prev.copy()
            infeasible.append(t)
        eta = np.atleast_1d(disturbance(rng))
        s = simulate_step(model, s, u, eta)
        states.append(s.copy())
        inputs.append(u.copy())
        costs.append(cost.stage(s, u))
        u_prev = u
    return ClosedLoopRecord(states=np.array(states), inputs=np.array(inputs),
                            stage_costs=np.array(costs),
                            infeasible_steps=infeasible)
