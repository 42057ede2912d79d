"""Linear disjunctive constraint systems, per-cell tightening/relaxation,
and assembly of the tightened (PP) and relaxed (RP) mixed-integer models.

Branch h of a system is the affine map g_h(x, theta) = C_h x + D_h theta
+ b_h; the chance constraint asks that with probability 1 - eps at least
one branch is componentwise nonpositive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CoverageImpossible, Infeasible, ModelTooLarge, Unbounded
from .geometry import Box, Polytope, linear_max
from .model import MilpModel, ModelBuilder
from .solver import LpProblem, solve_lp

DEFAULT_MARGIN = 1e-6
BINARY_CAP = 20_000


@dataclass(frozen=True)
class LinearCost:
    """Branch-independent cost J(x, theta) = c_x.x + c_theta.theta + const."""

    c_x: np.ndarray
    c_theta: np.ndarray
    const: float = 0.0

    def value(self, x, theta, h=None) -> float:
        return float(np.dot(self.c_x, x) + np.dot(self.c_theta, theta) + self.const)


@dataclass(frozen=True)
class OneNormCost:
    """Per-branch cost J_h(x, theta) = ||U_h x + V_h theta + u_h||_1."""

    U: list
    V: list
    u: list

    def value(self, x, theta, h: int) -> float:
        return float(np.abs(self.U[h] @ x + self.V[h] @ theta + self.u[h]).sum())


@dataclass(frozen=True)
class ConstraintSystem:
    branches: list  # (C_h, D_h, b_h) triples
    decision_box: Box
    objective: LinearCost | OneNormCost

    def __post_init__(self):
        if len(self.branches) < 1:
            raise ValueError("need at least one branch")
        n = self.branches[0][0].shape[1]
        n_th = self.branches[0][1].shape[1]
        for C, D, b in self.branches:
            if C.shape[1] != n or D.shape[1] != n_th or C.shape[0] != len(b):
                raise ValueError("inconsistent branch dimensions")

    @property
    def Z(self) -> int:
        return len(self.branches)

    @property
    def n(self) -> int:
        return self.branches[0][0].shape[1]

    @property
    def n_theta(self) -> int:
        return self.branches[0][1].shape[1]


@dataclass(frozen=True)
class Tightening:
    """Row-wise worst-case growth (tau) and shrink (gamma) of each branch
    over each cell, both relative to the cell representative, plus the
    disjointness margin added to each."""

    tau: dict    # (j, h) -> vector
    gamma: dict  # (j, h) -> vector
    margin: float


def _row_maxima(D: np.ndarray, region, rep: np.ndarray) -> np.ndarray:
    """max_{theta in region} D_row (theta - rep), per row."""
    if isinstance(region, Box):
        support = np.where(D >= 0, D * region.hi, D * region.lo).sum(axis=1)
        return support - D @ rep
    out = np.empty(D.shape[0])
    for l, row in enumerate(D):
        if np.max(np.abs(row)) == 0.0:
            out[l] = 0.0
        else:
            out[l] = linear_max(region, row) - row @ rep
    return out


def compute_tightening(system: ConstraintSystem, partition,
                       margin: float = DEFAULT_MARGIN) -> Tightening:
    """tau[(j,h)] and gamma[(j,h)] per branch row; both get + margin."""
    tau, gamma = {}, {}
    for j, cell in enumerate(partition.cells):
        for h, (_, D_h, _) in enumerate(system.branches):
            tau[(j, h)] = _row_maxima(D_h, cell.region, cell.representative) + margin
            gamma[(j, h)] = _row_maxima(-D_h, cell.region, cell.representative) + margin
    return Tightening(tau=tau, gamma=gamma, margin=margin)


def big_m_values(system: ConstraintSystem, partition,
                 tightening: Tightening) -> dict:
    """Per-(cell, branch, row) constants making deactivated rows non-binding
    over the decision box."""
    box = system.decision_box
    out = {}
    for j, cell in enumerate(partition.cells):
        rep = cell.representative
        for h, (C_h, D_h, b_h) in enumerate(system.branches):
            slack = np.maximum(tightening.tau[(j, h)], tightening.gamma[(j, h)])
            support = np.where(C_h >= 0, C_h * box.hi, C_h * box.lo).sum(axis=1)
            out[(j, h)] = support + D_h @ rep + b_h + slack + 1.0
    return out


def greedy_cover(masses: np.ndarray, eps_eff: float) -> list[int]:
    """Cells sorted by mass descending (ties by index), accumulated until
    the cover mass reaches 1 - eps_eff."""
    order = sorted(range(len(masses)), key=lambda j: (-masses[j], j))
    need = 1.0 - eps_eff
    total, chosen = 0.0, []
    for j in order:
        if total >= need - 1e-12:
            break
        chosen.append(j)
        total += masses[j]
    if total < need - 1e-12:
        raise CoverageImpossible(
            f"total mass {total} below required {need}")
    return sorted(chosen)


def _branch_feasible(system: ConstraintSystem, C_h: np.ndarray,
                     rhs: np.ndarray) -> bool:
    """Is {x in decision box : C_h x <= rhs} nonempty?"""
    box = system.decision_box
    # cheap per-row necessary condition
    row_min = np.where(C_h >= 0, C_h * box.lo, C_h * box.hi).sum(axis=1)
    if np.any(row_min > rhs + 1e-12):
        return False
    try:
        solve_lp(LpProblem(c=np.zeros(system.n), A_ub=C_h, b_ub=rhs,
                           lb=box.lo, ub=box.hi))
        return True
    except Infeasible:
        return False


def _build_model(system: ConstraintSystem, partition, tightening: Tightening,
                 eps_eff: float, relax: bool, selection_mode: str,
                 binary_cap: int, presolve: bool) -> MilpModel:
    if not 0.0 <= eps_eff < 1.0:
        raise ValueError("effective risk must be in [0, 1)")
    K, Z = partition.K, system.Z
    if K * Z > binary_cap:
        raise ModelTooLarge(f"K*Z = {K * Z} exceeds cap {binary_cap}")
    masses = partition.masses
    reps = partition.representatives
    box = system.decision_box
    bigM = big_m_values(system, partition, tightening)
    obj = system.objective

    mb = ModelBuilder()
    x_idx = [mb.add_var(f"x{i}", lb=box.lo[i], ub=box.hi[i])
             for i in range(system.n)]
    t_idx = [mb.add_var(f"t{j}", obj=masses[j]) for j in range(K)]
    z_idx = [mb.add_var(f"z{j}", binary=True) for j in range(K)]
    y_idx = {(j, h): mb.add_var(f"y{j}_{h}", binary=True)
             for j in range(K) for h in range(Z)}

    # coverage: sum_j mass_j z_j >= 1 - eps_eff  (exactly once)
    mb.add_le(z_idx, list(-masses), -(1.0 - eps_eff))
    if masses.sum() < 1.0 - eps_eff - 1e-9:
        raise CoverageImpossible("cell masses cannot reach required coverage")

    for j in range(K):
        mb.add_eq([y_idx[(j, h)] for h in range(Z)], [1.0] * Z, 1.0)

    fixed_cover = None
    if selection_mode == "greedy":
        fixed_cover = set(greedy_cover(masses, eps_eff))

    feas: dict[tuple[int, int], bool] = {}
    for j in range(K):
        rep = reps[j]
        for h, (C_h, D_h, b_h) in enumerate(system.branches):
            slack = tightening.gamma[(j, h)] if relax else -tightening.tau[(j, h)]
            rhs = -D_h @ rep - b_h + slack
            ok = _branch_feasible(system, C_h, rhs) if presolve else True
            feas[(j, h)] = ok
            if not ok:
                continue
            M = bigM[(j, h)]
            yv, zv = y_idx[(j, h)], z_idx[j]
            for l in range(C_h.shape[0]):
                cols = list(x_idx) + [yv, zv]
                coefs = list(C_h[l]) + [M[l], M[l]]
                mb.add_le(cols, coefs, rhs[l] + 2.0 * M[l])

    # cost epigraph
    if isinstance(obj, LinearCost):
        for j in range(K):
            # t_j >= c_x.x + c_theta.rep_j + const
            mb.add_le(list(x_idx) + [t_idx[j]],
                      list(obj.c_x) + [-1.0],
                      -(float(np.dot(obj.c_theta, reps[j])) + obj.const))
    else:
        n_rows = obj.U[0].shape[0]
        for j in range(K):
            e_idx = [mb.add_var(f"e{j}_{r}", lb=0.0) for r in range(n_rows)]
            mb.add_le(e_idx + [t_idx[j]], [1.0] * n_rows + [-1.0], 0.0)
            rep = reps[j]
            for h in range(Z):
                U, off = obj.U[h], obj.V[h] @ rep + obj.u[h]
                sup_pos = np.where(U >= 0, U * box.hi, U * box.lo).sum(axis=1)
                sup_neg = np.where(-U >= 0, -U * box.hi, -U * box.lo).sum(axis=1)
                Mc = np.maximum(sup_pos + off, sup_neg - off) + 1.0
                yv = y_idx[(j, h)]
                for r in range(n_rows):
                    # e >= +-(U x + off) - Mc (1 - y)
                    mb.add_le(list(x_idx) + [e_idx[r], yv],
                              list(U[r]) + [-1.0, Mc[r]], Mc[r] - off[r])
                    mb.add_le(list(x_idx) + [e_idx[r], yv],
                              list(-U[r]) + [-1.0, Mc[r]], Mc[r] + off[r])

    mb.meta.update(x_idx=x_idx, t_idx=t_idx, z_idx=z_idx,
                   y_idx={f"{j},{h}": v for (j, h), v in y_idx.items()},
                   eps_eff=eps_eff, relax=relax,
                   selection_mode=selection_mode)
    model = mb.build()

    # presolve consequences and greedy fixing act on variable bounds
    for j in range(K):
        if fixed_cover is not None:
            val = 1.0 if j in fixed_cover else 0.0
            model.lb[z_idx[j]] = model.ub[z_idx[j]] = val
        for h in range(Z):
            if not feas[(j, h)]:
                covered = fixed_cover is not None and j in fixed_cover
                if covered:
                    model.ub[y_idx[(j, h)]] = 0.0
        if fixed_cover is not None and j in fixed_cover:
            if all(not feas[(j, h)] for h in range(Z)):
                raise Infeasible(f"covered cell {j} admits no feasible branch")
    if fixed_cover is None:
        # optimal mode: forbid covering a cell through an infeasible branch
        extra = [([y_idx[(j, h)], z_idx[j]], [1.0, 1.0], 1.0)
                 for (j, h), ok in feas.items() if not ok]
        if extra:
            import scipy.sparse as sp
            rows, data, ri, rhs = [], [], [], []
            for k, (cols, coefs, b) in enumerate(extra):
                ri.extend([k, k])
                rows.extend(cols)
                data.extend(coefs)
                rhs.append(b)
            A_new = sp.csr_matrix((data, (ri, rows)),
                                  shape=(len(extra), model.num_vars))
            model = MilpModel(
                c=model.c,
                A_ub=sp.vstack([model.A_ub, A_new], format="csr"),
                b_ub=np.concatenate([model.b_ub, rhs]),
                A_eq=model.A_eq, b_eq=model.b_eq, lb=model.lb, ub=model.ub,
                binary=model.binary, names=model.names, meta=model.meta)
    return model


def build_pp(system: ConstraintSystem, partition, tightening: Tightening,
             eps_eff: float, selection_mode: str = "optimal",
             binary_cap: int = BINARY_CAP, presolve: bool = True) -> MilpModel:
    """Tightened problem at effective risk eps - delta."""
    return _build_model(system, partition, tightening, eps_eff, relax=False,
                        selection_mode=selection_mode, binary_cap=binary_cap,
                        presolve=presolve)


def build_rp(system: ConstraintSystem, partition, tightening: Tightening,
             eps_eff: float, selection_mode: str = "optimal",
             binary_cap: int = BINARY_CAP, presolve: bool = True) -> MilpModel:
    """Relaxed problem at effective risk eps + delta."""
    return _build_model(system, partition, tightening, eps_eff, relax=True,
                        selection_mode=selection_mode, binary_cap=binary_cap,
                        presolve=presolve)


def extract_solution(model: MilpModel, solution) -> dict:
    """Pull x, cover set, and per-cell branch choice out of a solution."""
    meta = model.meta
    v = solution.full
    x = v[meta["x_idx"]]
    z = {j: v[idx] for j, idx in enumerate(meta["z_idx"])}
    cover = sorted(j for j, val in z.items() if val > 0.5)
    branch = {}
    for key, idx in meta["y_idx"].items():
        j, h = (int(s) for s in key.split(","))
        if v[idx] > 0.5:
            branch[j] = h
    t = v[meta["t_idx"]]
    return {"x": np.asarray(x), "cover": cover, "branch": branch, "t": np.asarray(t)}
