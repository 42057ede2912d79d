"""Linear-programming oracle and deterministic branch-and-bound MILP solver.

The LP oracle wraps the HiGHS dual simplex (via scipy) behind a small
problem type; the mixed-integer search is a best-first branch-and-bound
over the binary variables, with most-fractional branching and ties broken
by variable index so that repeated solves are bit-reproducible.
"""

from __future__ import annotations

import heapq
import os
import shlex
import subprocess
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .errors import EngineUnavailable, Infeasible, IterationLimit, Unbounded
from .model import MilpModel, write_lp

FEAS_TOL = 1e-6
INT_TOL = 1e-6
DEFAULT_GAP = 1e-6


@dataclass
class LpProblem:
    """min c'x  s.t.  A_ub x <= b_ub, A_eq x = b_eq, lb <= x <= ub."""

    c: np.ndarray
    A_ub: np.ndarray | sp.spmatrix | None = None
    b_ub: np.ndarray | None = None
    A_eq: np.ndarray | sp.spmatrix | None = None
    b_eq: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None


@dataclass
class LpResult:
    x: np.ndarray
    value: float
    dual_ub: np.ndarray | None = None
    dual_eq: np.ndarray | None = None


@dataclass
class MilpSolution:
    x: np.ndarray                 # continuous part (non-binary variables)
    binaries: np.ndarray          # values of the binary variables
    objective: float
    status: str                   # Optimal | Infeasible | GapLimit
    gap: float
    node_count: int
    full: np.ndarray = field(default=None, repr=False)  # all variables


def solve_lp(p: LpProblem) -> LpResult:
    """Solve the LP; raises Infeasible / Unbounded / IterationLimit."""
    n = len(p.c)
    lb = p.lb if p.lb is not None else np.full(n, -np.inf)
    ub = p.ub if p.ub is not None else np.full(n, np.inf)
    bounds = list(zip(lb, ub))
    res = linprog(p.c, A_ub=p.A_ub, b_ub=p.b_ub, A_eq=p.A_eq, b_eq=p.b_eq,
                  bounds=bounds, method="highs")
    if res.status == 2:
        raise Infeasible("LP infeasible")
    if res.status == 3:
        raise Unbounded("LP unbounded")
    if res.status == 1:
        raise IterationLimit("LP iteration limit reached")
    if res.status != 0:
        raise Infeasible(f"LP solver failure: {res.message}")
    dual_ub = res.ineqlin.marginals if p.A_ub is not None else None
    dual_eq = res.eqlin.marginals if p.A_eq is not None else None
    return LpResult(x=res.x, value=float(res.fun), dual_ub=dual_ub, dual_eq=dual_eq)


def _relaxation(m: MilpModel, lb: np.ndarray, ub: np.ndarray) -> LpResult:
    return solve_lp(LpProblem(c=m.c, A_ub=m.A_ub, b_ub=m.b_ub,
                              A_eq=m.A_eq, b_eq=m.b_eq, lb=lb, ub=ub))


def _check_feasible(m: MilpModel, v: np.ndarray) -> bool:
    if m.A_ub.shape[0] and np.max(m.A_ub @ v - m.b_ub) > FEAS_TOL:
        return False
    if m.A_eq.shape[0] and np.max(np.abs(m.A_eq @ v - m.b_eq)) > FEAS_TOL:
        return False
    return True


def solve_milp(m: MilpModel, gap_tol: float = DEFAULT_GAP,
               time_limit: float | None = None,
               node_limit: int = 200_000) -> MilpSolution:
    """Best-first branch-and-bound on the binary variables.

    Branching picks the most fractional binary (ties by lowest index);
    nodes are explored in order of their LP relaxation bound.  Terminates
    Optimal within the relative gap, or GapLimit on time/node budget with
    the certified bound recorded in ``gap``.
    """
    bin_idx = np.flatnonzero(m.binary)
    t0 = time.monotonic()

    incumbent: np.ndarray | None = None
    inc_val = np.inf
    node_count = 0
    counter = 0
    heap: list[tuple[float, int, np.ndarray, np.ndarray]] = []

    try:
        root = _relaxation(m, m.lb, m.ub)
    except Infeasible:
        raise Infeasible("MILP infeasible (root relaxation)")
    heapq.heappush(heap, (root.value, counter, m.lb.copy(), m.ub.copy()))

    best_bound = root.value
    while heap:
        bound, _, lb, ub = heapq.heappop(heap)
        best_bound = bound if not heap else min(bound, heap[0][0])
        if incumbent is not None:
            rel_gap = (inc_val - bound) / max(1.0, abs(inc_val))
            if rel_gap <= gap_tol:
                break
        try:
            res = _relaxation(m, lb, ub)
        except Infeasible:
            continue
        node_count += 1
        if res.value >= inc_val - gap_tol * max(1.0, abs(inc_val)):
            continue
        vals = res.x[bin_idx]
        frac = np.abs(vals - np.round(vals))
        if frac.size == 0 or frac.max() <= INT_TOL:
            v = res.x.copy()
            v[bin_idx] = np.round(v[bin_idx])
            if res.value < inc_val:
                incumbent, inc_val = v, res.value
            continue
        # most fractional; ties by lowest index
        j = int(np.argmax(np.isclose(frac, frac.max(), atol=1e-12)))
        var = bin_idx[j]
        fv = vals[j]
        for branch_up in (False, True):
            nlb, nub = lb.copy(), ub.copy()
            if branch_up:
                nlb[var] = 1.0
            else:
                nub[var] = 0.0
            counter += 1
            heapq.heappush(heap, (res.value, counter, nlb, nub))
        del fv
        if time_limit is not None and time.monotonic() - t0 > time_limit:
            break
        if node_count >= node_limit:
            break

    if incumbent is None:
        if heap:  # budget exhausted without incumbent
            raise Infeasible("MILP: no incumbent found within budget")
        raise Infeasible("MILP infeasible")

    open_bound = min([h[0] for h in heap], default=inc_val)
    bound_final = min(inc_val, open_bound)
    gap = (inc_val - bound_final) / max(1.0, abs(inc_val))
    status = "Optimal" if gap <= gap_tol else "GapLimit"
    assert _check_feasible(m, incumbent)
    cont = incumbent[~m.binary]
    return MilpSolution(x=cont, binaries=incumbent[bin_idx], objective=inc_val,
                        status=status, gap=max(gap, 0.0), node_count=node_count,
                        full=incumbent)


def solve_by_enumeration(m: MilpModel) -> MilpSolution:
    """Exhaustive oracle: try every assignment of the free binaries, one LP
    per leaf.  Only for small instances; used for cross-checking."""
    free = m.free_binary_indices()
    if len(free) > 24:
        raise ValueError("enumeration oracle limited to 24 free binaries")
    bin_idx = np.flatnonzero(m.binary)
    best = None
    best_val = np.inf
    n_inf = 0
    for code in range(2 ** len(free)):
        lb, ub = m.lb.copy(), m.ub.copy()
        for k, var in enumerate(free):
            bit = (code >> k) & 1
            lb[var] = ub[var] = float(bit)
        try:
            res = _relaxation(m, lb, ub)
        except Infeasible:
            n_inf += 1
            continue
        if res.value < best_val:
            best_val = res.value
            best = res.x.copy()
            best[bin_idx] = np.round(best[bin_idx])
    if best is None:
        raise Infeasible("MILP infeasible (enumeration)")
    return MilpSolution(x=best[~m.binary], binaries=best[bin_idx],
                        objective=best_val, status="Optimal", gap=0.0,
                        node_count=2 ** len(free) - n_inf, full=best)


ENGINE_ENV = "PARTCC_MILP_ENGINE"


def external_adapter(m: MilpModel, engine_config: dict | None = None) -> MilpSolution:
    """Hand the model to an external MILP engine via LP-file + subprocess.

    ``engine_config['command']`` is a template with ``{lp}`` and ``{sol}``
    placeholders (default from the PARTCC_MILP_ENGINE environment variable,
    HiGHS convention).  Raises EngineUnavailable when no engine is
    configured or the subprocess fails; callers fall back to solve_milp.
    """
    cfg = dict(engine_config or {})
    command = cfg.get("command") or os.environ.get(ENGINE_ENV)
    if not command:
        raise EngineUnavailable("no external MILP engine configured")
    if "{lp}" not in command:
        command = command + " {lp} --solution_file {sol}"
    with tempfile.TemporaryDirectory() as tmp:
        lp_path = os.path.join(tmp, "model.lp")
        sol_path = os.path.join(tmp, "model.sol")
        write_lp(m, lp_path)
        cmd = command.format(lp=lp_path, sol=sol_path)
        try:
            proc = subprocess.run(shlex.split(cmd), capture_output=True,
                                  text=True, timeout=cfg.get("timeout", 600))
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise EngineUnavailable(f"engine invocation failed: {exc}") from exc
        if not os.path.exists(sol_path):
            if "infeasible" in (proc.stdout + proc.stderr).lower():
                raise Infeasible("external engine reports infeasible")
            raise EngineUnavailable(
                f"engine produced no solution file (rc={proc.returncode})")
        values = _parse_solution_file(sol_path, m.names)
    v = np.array([values.get(name, 0.0) for name in m.names])
    if not _check_feasible(m, np.where(m.binary, np.round(v), v)):
        raise EngineUnavailable("external solution fails feasibility check")
    v[m.binary] = np.round(v[m.binary])
    obj = float(m.c @ v)
    return MilpSolution(x=v[~m.binary], binaries=v[m.binary], objective=obj,
                        status="Optimal", gap=0.0, node_count=0, full=v)


def _parse_solution_file(path: str, names: list[str]) -> dict[str, float]:
    """Accepts 'name value' pairs; skips HiGHS section headers."""
    known = set(names)
    out: dict[str, float] = {}
    with open(path, encoding="utf-8") as fh:
        for ln in fh:
            parts = ln.split()
            if len(parts) == 2 and parts[0] in known:
                try:
                    out[parts[0]] = float(parts[1])
                except ValueError:
                    continue
    return out


def solve_with_fallback(m: MilpModel, engine_config: dict | None = None,
                        gap_tol: float = DEFAULT_GAP,
                        time_limit: float | None = None) -> tuple[MilpSolution, str]:
    """Try the external engine, fall back to the built-in solver.

    Returns (solution, backend) with backend in {'external', 'builtin'}.
    """
    try:
        return external_adapter(m, engine_config), "external"
    except EngineUnavailable:
        return solve_milp(m, gap_tol=gap_tol, time_limit=time_limit), "builtin"
