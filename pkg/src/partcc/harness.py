"""Experiment orchestration: configuration loading, the sinusoid-plus-noise
disturbance generator, end-to-end solve pipelines, the three canned
experiments (feasibility sweep, bound table, closed-loop comparison), and
CSV emission with full provenance.

All randomness flows through counter-based generators keyed off the master
seed, one substream per repetition, so results are bit-reproducible.
"""

from __future__ import annotations

import json
import math
import time
import warnings
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .certify import (BoundContext, concentration_constants, optimize_r,
                      partition_roughness, performance_interval,
                      monte_carlo_violation, required_samples)
from .errors import (ConfigError, Infeasible, IoError, NoActiveRegion,
                     SolverInfeasible)
from .geometry import Box, Polytope
from .partition import (Partition, PartitionCell, SampleSet, adaptive_split,
                        grid_partition, summarize, voronoi_partition)
from .problems import build_pp, build_rp, compute_tightening, extract_solution
from .pwa import (ClosedLoopRecord, PwaModel, StageCost, build_prediction,
                  closed_loop, compile_ocp, lipschitz_constants, simulate_step)
from .solver import solve_milp, solve_with_fallback


# ---------------------------------------------------------------------------
# RNG plumbing

def substream(master_seed: int, *idx: int) -> np.random.Generator:
    """Counter-based generator for one labelled repetition."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(idx))
    return np.random.Generator(np.random.Philox(
        key=ss.generate_state(2, np.uint64)))


def int_seed(master_seed: int, *idx: int) -> int:
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(idx))
    return int(ss.generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# Disturbance model:  eta_{k,i} = a_{k,i} sin(omega_i k + phi_i) + w_{k,i}

@dataclass
class DisturbanceGenerator:
    """Sinusoid with random amplitude, frequency, and phase plus uniform
    noise; per-step amplitude and noise ranges scale with (k + 1).

    amp_base[i] = (lo, hi) of the amplitude at k = 0 for channel i;
    noise_base[i] = (lo, hi) of the additive noise at k = 0;
    freq_means[i] lists the mixture means of omega_i (shared weights,
    common variance); phase is uniform on phase_range.
    """

    horizon: int
    amp_base: np.ndarray
    noise_base: np.ndarray
    freq_means: np.ndarray
    freq_weights: np.ndarray
    freq_var: float = 0.01
    phase_range: tuple = (-0.1, 0.1)
    seed: int = 0
    clipped: int = 0

    def __post_init__(self):
        self.amp_base = np.atleast_2d(np.asarray(self.amp_base, dtype=float))
        self.noise_base = np.atleast_2d(np.asarray(self.noise_base, dtype=float))
        self.freq_means = np.atleast_2d(np.asarray(self.freq_means, dtype=float))
        self.freq_weights = np.asarray(self.freq_weights, dtype=float)
        if not math.isclose(self.freq_weights.sum(), 1.0, abs_tol=1e-9):
            raise ValueError("mixture weights must sum to 1")

    @property
    def n_channels(self) -> int:
        return self.amp_base.shape[0]

    def domain(self) -> Box:
        """Declared hyper-rectangle containing every realization."""
        ne, N = self.n_channels, self.horizon
        hi = np.empty(N * ne)
        for k in range(N):
            for i in range(ne):
                bound = (self.amp_base[i, 1]
                         + max(abs(self.noise_base[i, 0]),
                               abs(self.noise_base[i, 1]))) * (k + 1)
                hi[k * ne + i] = bound
        return Box(-hi, hi)


def generate_disturbances(gen: DisturbanceGenerator, count: int,
                          rng: np.random.Generator | None = None) -> SampleSet:
    """Stacked samples of dimension horizon * n_channels, step-major.

    Samples falling outside the declared box (possible only through the
    unbounded frequency draw, and then never in practice) are clipped and
    counted on the generator.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if rng is None:
        rng = substream(gen.seed)
    ne, N = gen.n_channels, gen.horizon
    nc = len(gen.freq_weights)
    comp = rng.choice(nc, size=(count, ne), p=gen.freq_weights)
    omega = (gen.freq_means[np.arange(ne)[None, :], comp]
             + rng.normal(0.0, math.sqrt(gen.freq_var), size=(count, ne)))
    phi = rng.uniform(gen.phase_range[0], gen.phase_range[1], size=(count, ne))
    scale = np.arange(1, N + 1, dtype=float)[None, :, None]
    ua = rng.random((count, N, ne))
    a = (gen.amp_base[:, 0] + ua * (gen.amp_base[:, 1] - gen.amp_base[:, 0])) * scale
    uw = rng.random((count, N, ne))
    w = (gen.noise_base[:, 0] + uw * (gen.noise_base[:, 1] - gen.noise_base[:, 0])) * scale
    k = np.arange(N, dtype=float)[None, :, None]
    eta = a * np.sin(omega[:, None, :] * k + phi[:, None, :]) + w
    flat = eta.reshape(count, N * ne)
    box = gen.domain()
    clipped = np.clip(flat, box.lo, box.hi)
    gen.clipped += int((np.abs(clipped - flat) > 0).sum())
    return SampleSet(samples=clipped, seed=gen.seed)


# ---------------------------------------------------------------------------
# Configuration

DEFAULT_CONFIG: dict = {
    "seed": 12345,
    "horizon": 3,
    "risk": {"epsilon": 0.15, "delta": 0.05, "beta": 1e-4},
    "system": None,  # None selects the built-in three-mode example
    "partition": {"strategy": "grid", "K": 8},
    "sampling": {"N": None, "samples_csv": None, "validation_draws": 2000},
    "solver": {"backend": "builtin", "gap": 1e-6, "time_limit": None,
               "engine": None, "selection": "greedy"},
    "experiment": {
        "repetitions": 5,
        "N_list": [200, 500],
        "K_delta": [[5, 0.1], [8, 0.05]],
        "K_list": [5, 10, 20],
        "delta_list": [0.05],
        "T_cl": 10,
        "strategies": ["adaptive", "kmeans"],
        "closedloop_K": [4, 8],
        "scenario_baseline": False,
        "scenario_N": [20, 50],
    },
    "output": {"dir": ".", "format": "csv", "plot": False},
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = dict(base)
    for key, val in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key '{path}{key}'")
        if isinstance(base[key], dict) and isinstance(val, dict):
            out[key] = _merge(base[key], val, path=f"{path}{key}.")
        else:
            out[key] = val
    return out


@dataclass
class ExperimentConfig:
    """Validated configuration, merged over the documented defaults."""

    raw: dict

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        merged = _merge(DEFAULT_CONFIG, data or {})
        risk = merged["risk"]
        if not 0 < risk["delta"] <= risk["epsilon"] < 1:
            raise ConfigError("risk requires 0 < delta <= epsilon < 1")
        if not 0 < risk["beta"] <= 1:
            raise ConfigError("risk requires 0 < beta <= 1")
        if merged["partition"]["strategy"] not in ("grid", "kmeans", "adaptive"):
            raise ConfigError("partition.strategy must be grid, kmeans, or adaptive")
        if merged["horizon"] < 1:
            raise ConfigError("horizon must be >= 1")
        return cls(raw=merged)

    @classmethod
    def from_json(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        return cls.from_dict(data)

    def __getitem__(self, key):
        return self.raw[key]

    def resolve_n(self, K: int, delta: float) -> int:
        """Explicit N when given (warning if below the concentration
        threshold), otherwise the smallest N meeting the threshold."""
        beta = self.raw["risk"]["beta"]
        needed = required_samples(K, delta, beta)
        explicit = self.raw["sampling"]["N"]
        if explicit is None:
            return needed
        if explicit < needed:
            warnings.warn(
                f"N={explicit} below the concentration threshold {needed} "
                f"for K={K}, delta={delta}, beta={beta}", stacklevel=2)
        return int(explicit)


# ---------------------------------------------------------------------------
# Built-in example system

def default_system() -> dict:
    """Three-mode system with coupled second and third states, box input
    set, and a chance constraint on the third state."""
    A1 = [[0.8, 1, 1], [0, 0.9, 1], [0, 0, 0.2]]
    A2 = [[0.8, 1, 1], [0, -0.9, 1], [0, 0, -0.2]]
    A3 = [[0.8, 1, 1], [0, 0.5, 1], [0, 0, 0.5]]
    B = [[0], [0], [1]]
    C = [[0, 0], [1, 0], [0, 1]]
    return {
        "modes": [{"A": A, "B": B, "C": C, "v": [0, 0, 0]}
                  for A in (A1, A2, A3)],
        "regions": [
            {"A": [[1, 0, 0]], "b": [-1]},                    # s1 <= -1
            {"A": [[1, 0, 0], [-1, 0, 0]], "b": [1, 1]},      # -1 <= s1 <= 1
            {"A": [[-1, 0, 0]], "b": [-1]},                   # s1 >= 1
        ],
        "state_set": {"A": [[0, 0, 1], [0, 0, -1]], "b": [0.7, 0.7]},
        "input_box": {"lo": [-0.7], "hi": [0.7]},
        "s0": [1.5, 2, 1],
        "Q": [[2, 0, 0], [0, 2, 0], [0, 0, 2]],
        "R": [[1]],
        "disturbance": {
            "amp_base": [[0.02, 0.03], [0.04, 0.06]],
            "noise_base": [[-0.03, 0.03], [-0.03, 0.03]],
            "freq_means": [[0.05, 0.12, 0.3, 0.5, 0.75],
                           [0.1, 0.24, 0.6, 1.0, 1.5]],
            "freq_weights": [0.05, 0.1, 0.4, 0.4, 0.05],
            "freq_var": 0.01,
            "phase_range": [-0.1, 0.1],
        },
    }


@dataclass
class Workbench:
    """Everything derived from the config that the experiments share."""

    model: PwaModel
    cost: StageCost
    prediction: object
    generator: DisturbanceGenerator
    domain: Box
    s0: np.ndarray
    horizon: int


def build_workbench(cfg: ExperimentConfig,
                    horizon: int | None = None) -> Workbench:
    spec = cfg["system"] or default_system()
    N = horizon if horizon is not None else cfg["horizon"]
    try:
        modes = [(np.asarray(m["A"], dtype=float), np.asarray(m["B"], dtype=float),
                  np.asarray(m["C"], dtype=float), np.asarray(m["v"], dtype=float))
                 for m in spec["modes"]]
        regions = [Polytope(np.asarray(r["A"], dtype=float),
                            np.asarray(r["b"], dtype=float))
                   for r in spec["regions"]]
        state_set = Polytope(np.asarray(spec["state_set"]["A"], dtype=float),
                             np.asarray(spec["state_set"]["b"], dtype=float))
        input_set = Box(np.asarray(spec["input_box"]["lo"], dtype=float),
                        np.asarray(spec["input_box"]["hi"], dtype=float))
        model = PwaModel(modes=modes, regions=regions, state_set=state_set,
                         input_set=input_set)
        cost = StageCost(Q=np.asarray(spec["Q"], dtype=float),
                         R=np.asarray(spec["R"], dtype=float))
        d = spec["disturbance"]
        gen = DisturbanceGenerator(
            horizon=N, amp_base=d["amp_base"], noise_base=d["noise_base"],
            freq_means=d["freq_means"], freq_weights=d["freq_weights"],
            freq_var=d.get("freq_var", 0.01),
            phase_range=tuple(d.get("phase_range", (-0.1, 0.1))),
            seed=cfg["seed"])
        s0 = np.asarray(spec["s0"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed system spec: {exc}") from exc
    pred = build_prediction(model, N)
    return Workbench(model=model, cost=cost, prediction=pred, generator=gen,
                     domain=gen.domain(), s0=s0, horizon=N)


def load_samples_csv(path: str) -> SampleSet:
    """One realization per row, comma-separated decimals.  A single header
    line of column names is tolerated and skipped."""
    try:
        try:
            data = np.loadtxt(path, delimiter=",", ndmin=2)
        except ValueError:
            data = np.loadtxt(path, delimiter=",", ndmin=2, skiprows=1)
    except (OSError, ValueError) as exc:
        raise IoError(f"cannot read samples from {path}: {exc}") from exc
    return SampleSet(samples=data)


# ---------------------------------------------------------------------------
# Pipeline pieces

def make_partition(domain: Box, samples: SampleSet, K: int, strategy: str,
                   seed: int, critical_dims=None) -> Partition:
    if strategy == "grid":
        regions = grid_partition(domain, K)
    elif strategy == "kmeans":
        regions = voronoi_partition(domain, samples, K, seed=seed)
    elif strategy == "adaptive":
        dims = (list(critical_dims) if critical_dims is not None
                else list(range(domain.dim)))
        regions = adaptive_split(domain, dims, K)
    else:
        raise ConfigError(f"unknown partition strategy '{strategy}'")
    return summarize(regions, samples, domain=domain)


def _solve_model(model, solver_cfg: dict):
    gap = solver_cfg.get("gap", 1e-6)
    tl = solver_cfg.get("time_limit")
    if solver_cfg.get("backend") == "external":
        engine = None
        if solver_cfg.get("engine"):
            engine = {"command": solver_cfg["engine"]}
        return solve_with_fallback(model, engine, gap_tol=gap, time_limit=tl)
    return solve_milp(model, gap_tol=gap, time_limit=tl), "builtin"


@dataclass
class SolveRecord:
    x: np.ndarray
    objective: float
    status: str
    backend: str
    node_count: int
    wall_time: float
    cover: list
    branch: dict


def solve_surrogate(system, part: Partition, eps_eff: float, relax: bool,
                    solver_cfg: dict) -> SolveRecord:
    tight = compute_tightening(system, part)
    build = build_rp if relax else build_pp
    model = build(system, part, tight, eps_eff,
                  selection_mode=solver_cfg.get("selection", "greedy"))
    t0 = time.perf_counter()
    sol, backend = _solve_model(model, solver_cfg)
    wall = time.perf_counter() - t0
    info = extract_solution(model, sol)
    return SolveRecord(x=info["x"], objective=sol.objective, status=sol.status,
                       backend=backend, node_count=sol.node_count,
                       wall_time=wall, cover=info["cover"], branch=info["branch"])


def scenario_solve(system, domain: Box, samples: SampleSet,
                   solver_cfg: dict) -> SolveRecord:
    """Baseline enforcing every sampled constraint: each sample becomes a
    zero-width cell, zero effective risk, no tightening margin."""
    cells = [PartitionCell(region=Box(theta, theta), representative=theta,
                           mass=1.0 / samples.n, members=np.array([i]))
             for i, theta in enumerate(samples.samples)]
    part = Partition(domain=domain, cells=cells, n_samples=samples.n)
    tight = compute_tightening(system, part, margin=0.0)
    model = build_pp(system, part, tight, 0.0, selection_mode="greedy")
    t0 = time.perf_counter()
    sol, backend = _solve_model(model, solver_cfg)
    wall = time.perf_counter() - t0
    info = extract_solution(model, sol)
    return SolveRecord(x=info["x"], objective=sol.objective, status=sol.status,
                       backend=backend, node_count=sol.node_count,
                       wall_time=wall, cover=info["cover"], branch=info["branch"])


def bound_context(wb: Workbench, risk: dict, N: int) -> dict:
    """Constants for the concentration bound of the compiled problem."""
    L_eta, L_u = lipschitz_constants(wb.model, wb.prediction, wb.cost,
                                     wb.horizon)
    n = wb.horizon * wb.model.n_u
    R = float(np.linalg.norm(np.tile(wb.model.input_set.hi
                                     - wb.model.input_set.lo, wb.horizon)))
    D = wb.domain.diameter(q=1)
    r = optimize_r(L_eta, L_u, D, R, n, N, risk["beta"])
    ctx = BoundContext(L_theta=L_eta, L_x=L_u, q=1, D=D, R=R, n=n, r=r)
    c1, c2 = concentration_constants(ctx, N, risk["beta"])
    return {"L_eta": L_eta, "L_u": L_u, "r": r, "c1": c1, "c2": c2, "ctx": ctx}


# ---------------------------------------------------------------------------
# Experiments

def _violation(x, system, gen: DisturbanceGenerator, M: int, seed: int) -> float:
    def sampler(rng, count):
        return generate_disturbances(gen, count, rng).samples
    return monte_carlo_violation(x, system, sampler, M, seed)


def run_fig2(cfg: ExperimentConfig) -> tuple[list[dict], list[dict]]:
    """Violation-vs-sample-size sweep.  Returns (summary, detail) tables;
    both are deterministic functions of the config (no wall-clock columns),
    so repeated runs write identical files."""
    wb = build_workbench(cfg)
    risk = cfg["risk"]
    reps = cfg["experiment"]["repetitions"]
    M = cfg["sampling"]["validation_draws"]
    system = compile_ocp(wb.model, wb.prediction, wb.cost, wb.s0)
    summary, detail = [], []
    points = list(product(enumerate(cfg["experiment"]["K_delta"]),
                          enumerate(cfg["experiment"]["N_list"])))
    for (pi, (K, delta)), (ni, N) in points:
        viols, nodes, n_failed = [], [], 0
        for rep in range(reps):
            rng = substream(cfg["seed"], 0, pi, ni, rep)
            samples = generate_disturbances(wb.generator, N, rng)
            part = make_partition(wb.domain, samples, K,
                                  cfg["partition"]["strategy"],
                                  seed=int_seed(cfg["seed"], 0, pi, ni, rep, 1))
            try:
                rec = solve_surrogate(system, part, risk["epsilon"] - delta,
                                      relax=False, solver_cfg=cfg["solver"])
            except (Infeasible, SolverInfeasible) as exc:
                n_failed += 1
                detail.append({"experiment": "fig2", "method": "partition",
                               "N": N, "K": K, "delta": delta,
                               "beta": risk["beta"], "rep": rep,
                               "seed": cfg["seed"], "status": type(exc).__name__,
                               "objective": "", "violation": "",
                               "node_count": 0, "backend": ""})
                continue
            viol = _violation(rec.x, system, wb.generator, M,
                              int_seed(cfg["seed"], 0, pi, ni, rep, 2))
            viols.append(viol)
            nodes.append(rec.node_count)
            detail.append({"experiment": "fig2", "method": "partition",
                           "N": N, "K": K, "delta": delta,
                           "beta": risk["beta"], "rep": rep,
                           "seed": cfg["seed"], "status": rec.status,
                           "objective": rec.objective, "violation": viol,
                           "node_count": rec.node_count,
                           "backend": rec.backend})
        summary.append({
            "method": "partition", "N": N, "K": K, "delta": delta,
            "beta": risk["beta"], "epsilon": risk["epsilon"],
            "seed": cfg["seed"], "repetitions": reps, "failed": n_failed,
            "mean_violation": float(np.mean(viols)) if viols else "",
            "std_violation": float(np.std(viols)) if viols else "",
            "mean_nodes": float(np.mean(nodes)) if nodes else 0.0,
        })
    if cfg["experiment"]["scenario_baseline"]:
        for ni, N in enumerate(cfg["experiment"]["scenario_N"]):
            viols = []
            for rep in range(reps):
                rng = substream(cfg["seed"], 9, ni, rep)
                samples = generate_disturbances(wb.generator, N, rng)
                try:
                    rec = scenario_solve(system, wb.domain, samples, cfg["solver"])
                except (Infeasible, SolverInfeasible):
                    continue
                viols.append(_violation(rec.x, system, wb.generator, M,
                                        int_seed(cfg["seed"], 9, ni, rep, 2)))
            summary.append({
                "method": "scenario", "N": N, "K": N, "delta": 0.0,
                "beta": risk["beta"], "epsilon": risk["epsilon"],
                "seed": cfg["seed"], "repetitions": reps,
                "failed": reps - len(viols),
                "mean_violation": float(np.mean(viols)) if viols else "",
                "std_violation": float(np.std(viols)) if viols else "",
                "mean_nodes": 0.0,
            })
    return summary, detail


def run_table1(cfg: ExperimentConfig) -> tuple[list[dict], list[dict]]:
    """Performance-bound table over (K, delta)."""
    wb = build_workbench(cfg)
    risk = cfg["risk"]
    reps = cfg["experiment"]["repetitions"]
    system = compile_ocp(wb.model, wb.prediction, wb.cost, wb.s0)
    summary, detail = [], []
    for ki, K in enumerate(cfg["experiment"]["K_list"]):
        for di, delta in enumerate(cfg["experiment"]["delta_list"]):
            N = cfg.resolve_n(K, delta)
            bc = bound_context(wb, risk, N)
            lows, ups, times = [], [], []
            for rep in range(reps):
                rng = substream(cfg["seed"], 1, ki, di, rep)
                samples = generate_disturbances(wb.generator, N, rng)
                part = make_partition(wb.domain, samples, K,
                                      cfg["partition"]["strategy"],
                                      seed=int_seed(cfg["seed"], 1, ki, di, rep, 1))
                row = {"experiment": "table1", "K": K, "delta": delta,
                       "beta": risk["beta"], "N": N, "rep": rep,
                       "seed": cfg["seed"]}
                try:
                    pp = solve_surrogate(system, part, risk["epsilon"] - delta,
                                         relax=False, solver_cfg=cfg["solver"])
                    rp = solve_surrogate(system, part, risk["epsilon"] + delta,
                                         relax=True, solver_cfg=cfg["solver"])
                except (Infeasible, SolverInfeasible) as exc:
                    row.update(status=type(exc).__name__)
                    detail.append(row)
                    continue
                c3 = partition_roughness(part, samples, bc["L_eta"], q=1)
                interval = performance_interval(pp.objective, rp.objective,
                                                bc["c1"], bc["c2"], c3,
                                                risk["beta"])
                lows.append(interval.lower)
                ups.append(interval.upper)
                times.append(pp.wall_time + rp.wall_time)
                row.update(status=f"{pp.status}/{rp.status}",
                           J_pp=pp.objective, J_rp=rp.objective,
                           c1=bc["c1"], c2=bc["c2"], c3=c3,
                           lower=interval.lower, upper=interval.upper,
                           r_opt=bc["r"],
                           node_count=pp.node_count + rp.node_count,
                           backend=pp.backend,
                           wall_time_s=pp.wall_time + rp.wall_time)
                detail.append(row)
            summary.append({
                "K": K, "delta": delta, "N": N, "beta": risk["beta"],
                "seed": cfg["seed"], "repetitions": reps,
                "solved": len(lows),
                "LB": float(np.mean(lows)) if lows else "",
                "UB": float(np.mean(ups)) if ups else "",
                "time_total_s": float(np.mean(times)) if times else "",
            })
    return summary, detail


def _predicted_slack_step(model: PwaModel, s, u_stack, horizon: int) -> int:
    """Prediction step (1-based) whose state sits closest to the state-set
    boundary under the nominal (zero-disturbance) rollout."""
    p = model.state_set
    AS, bS = ((p.to_polytope().A, p.to_polytope().b)
              if isinstance(p, Box) else (p.A, p.b))
    nu = model.n_u
    sk = np.asarray(s, dtype=float)
    best_k, best_slack = 1, np.inf
    for k in range(1, horizon + 1):
        u = u_stack[(k - 1) * nu:k * nu]
        try:
            sk = simulate_step(model, sk, u, np.zeros(model.n_eta))
        except NoActiveRegion:
            break
        slack = float(np.min(bS - AS @ sk))
        if slack < best_slack:
            best_k, best_slack = k, slack
    return best_k


def run_closedloop(cfg: ExperimentConfig) -> tuple[list[dict], list[dict]]:
    """Per-strategy closed-loop cost series with partition timing stats."""
    wb = build_workbench(cfg)
    risk = cfg["risk"]
    reps = cfg["experiment"]["repetitions"]
    T_cl = cfg["experiment"]["T_cl"]
    summary, detail = [], []
    ne = wb.model.n_eta
    for si, strategy in enumerate(cfg["experiment"]["strategies"]):
        for ki, K in enumerate(cfg["experiment"]["closedloop_K"]):
            N = cfg.resolve_n(K, risk["delta"])
            series = np.full((reps, T_cl), np.nan)
            ptimes, n_infeasible = [], 0
            for rep in range(reps):
                state = {"kbar": 1}

                def controller(s, t, rng, _state=state):
                    samples = generate_disturbances(wb.generator, N, rng)
                    dims = list(range((_state["kbar"] - 1) * ne,
                                      _state["kbar"] * ne))
                    tp = time.perf_counter()
                    part = make_partition(
                        wb.domain, samples, K, strategy,
                        seed=int(rng.integers(2 ** 62)), critical_dims=dims)
                    ptimes.append(time.perf_counter() - tp)
                    system = compile_ocp(wb.model, wb.prediction, wb.cost, s)
                    try:
                        rec = solve_surrogate(
                            system, part, risk["epsilon"] - risk["delta"],
                            relax=False, solver_cfg=cfg["solver"])
                    except Infeasible as exc:
                        raise SolverInfeasible(str(exc)) from exc
                    _state["kbar"] = _predicted_slack_step(
                        wb.model, s, rec.x, wb.horizon)
                    return rec.x[:wb.model.n_u]

                def disturbance(rng):
                    return generate_disturbances(
                        wb.generator, 1, rng).samples[0, :ne]

                rec = closed_loop(wb.model, controller, wb.s0, T_cl, wb.cost,
                                  disturbance,
                                  seed=int_seed(cfg["seed"], 2, si, ki, rep))
                series[rep] = rec.stage_costs
                n_infeasible += len(rec.infeasible_steps)
                for t in range(T_cl):
                    detail.append({
                        "experiment": "closedloop", "strategy": strategy,
                        "K": K, "N": N, "delta": risk["delta"],
                        "beta": risk["beta"], "rep": rep, "t": t + 1,
                        "seed": cfg["seed"],
                        "stage_cost": float(rec.stage_costs[t]),
                        "infeasible": int(t in rec.infeasible_steps),
                    })
            for t in range(T_cl):
                summary.append({
                    "strategy": strategy, "K": K, "N": N, "t": t + 1,
                    "delta": risk["delta"], "beta": risk["beta"],
                    "seed": cfg["seed"], "repetitions": reps,
                    "mean_cost": float(np.nanmean(series[:, t])),
                    "std_cost": float(np.nanstd(series[:, t])),
                    "infeasible_steps": n_infeasible,
                    "partition_time_ms": 1e3 * float(np.mean(ptimes)),
                })
    return summary, detail


def run_single_solve(cfg: ExperimentConfig, with_rp: bool = False,
                     with_validation: bool = False) -> dict:
    """One sample-partition-solve pass; optionally the relaxed problem with
    the performance interval, and a Monte Carlo violation estimate."""
    wb = build_workbench(cfg)
    risk = cfg["risk"]
    K = cfg["partition"]["K"]
    N = cfg.resolve_n(K, risk["delta"])
    csv_path = cfg["sampling"]["samples_csv"]
    if csv_path:
        samples = load_samples_csv(csv_path)
        N = samples.n
    else:
        samples = generate_disturbances(wb.generator, N,
                                        substream(cfg["seed"], 3))
    part = make_partition(wb.domain, samples, K, cfg["partition"]["strategy"],
                          seed=int_seed(cfg["seed"], 3, 1))
    system = compile_ocp(wb.model, wb.prediction, wb.cost, wb.s0)
    pp = solve_surrogate(system, part, risk["epsilon"] - risk["delta"],
                         relax=False, solver_cfg=cfg["solver"])
    out = {"N": N, "K": K, "delta": risk["delta"], "beta": risk["beta"],
           "epsilon": risk["epsilon"], "seed": cfg["seed"],
           "J_pp": pp.objective, "status": pp.status, "backend": pp.backend,
           "node_count": pp.node_count, "wall_time_s": pp.wall_time,
           "u": pp.x, "cover": pp.cover}
    if with_rp:
        rp = solve_surrogate(system, part, risk["epsilon"] + risk["delta"],
                             relax=True, solver_cfg=cfg["solver"])
        bc = bound_context(wb, risk, N)
        c3 = partition_roughness(part, samples, bc["L_eta"], q=1)
        interval = performance_interval(pp.objective, rp.objective,
                                        bc["c1"], bc["c2"], c3, risk["beta"])
        out.update(J_rp=rp.objective, c1=bc["c1"], c2=bc["c2"], c3=c3,
                   lower=interval.lower, upper=interval.upper,
                   confidence=interval.confidence, r_opt=bc["r"])
    if with_validation:
        out["violation"] = _violation(
            pp.x, system, wb.generator, cfg["sampling"]["validation_draws"],
            int_seed(cfg["seed"], 3, 2))
        out["samples_outside_domain"] = samples.count_outside(wb.domain)
    return out


def run_partition_only(cfg: ExperimentConfig) -> list[dict]:
    """Partition summary table: per-cell mass and representative."""
    wb = build_workbench(cfg)
    K = cfg["partition"]["K"]
    N = cfg.resolve_n(K, cfg["risk"]["delta"])
    csv_path = cfg["sampling"]["samples_csv"]
    if csv_path:
        samples = load_samples_csv(csv_path)
    else:
        samples = generate_disturbances(wb.generator, N,
                                        substream(cfg["seed"], 4))
    part = make_partition(wb.domain, samples, K, cfg["partition"]["strategy"],
                          seed=int_seed(cfg["seed"], 4, 1))
    rows = []
    for j, cell in enumerate(part.cells):
        row = {"cell": j, "mass": cell.mass, "members": len(cell.members),
               "N": samples.n, "K": K, "seed": cfg["seed"]}
        for d, val in enumerate(cell.representative):
            row[f"rep_{d}"] = float(val)
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# Emission

def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".10g")
    if isinstance(value, np.ndarray):
        return " ".join(format(float(v), ".10g") for v in value)
    if isinstance(value, (list, tuple)):
        return " ".join(str(v) for v in value)
    return str(value)


def emit(table: list[dict], path: str, fmt: str = "csv",
         roles: dict | None = None) -> str:
    """Write rows as RFC-4180-style CSV (CRLF, header, '.' decimals, UTF-8).

    fmt='plotdata' additionally writes a column-role sidecar next to the
    CSV (mapping column name to x/y/series/meta).
    """
    if fmt not in ("csv", "plotdata"):
        raise ConfigError(f"unknown output format '{fmt}'")
    columns: list[str] = []
    for row in table:
        for key in row:
            if key not in columns:
                columns.append(key)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(columns) + "\r\n")
            for row in table:
                fh.write(",".join(_fmt(row.get(c, "")) for c in columns)
                         + "\r\n")
        if fmt == "plotdata":
            role_map = {c: (roles or {}).get(c, "meta") for c in columns}
            with open(path + ".roles.json", "w", encoding="utf-8") as fh:
                json.dump(role_map, fh, indent=2, sort_keys=True)
                fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path
