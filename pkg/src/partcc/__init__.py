"""Partition-based approximation of chance-constrained programs.

The pipeline: partition an uncertainty domain from samples, build the
tightened and relaxed mixed-integer surrogates, certify probabilistic
feasibility, and bound the true optimum; plus an application to model
predictive control of piecewise-affine systems.
"""

from .certify import (BoundContext, PerformanceInterval, RiskSpec,
                      analytic_gap, concentration_constants,
                      delta_continuity_interval, monte_carlo_violation,
                      optimize_r, partition_roughness, performance_interval,
                      required_samples, subset_discrepancy)
from .geometry import (Box, Polytope, hausdorff_exact, linear_max,
                       sigma_constant, vertices_2d)
from .harness import (DisturbanceGenerator, ExperimentConfig, emit,
                      generate_disturbances, run_closedloop, run_fig2,
                      run_single_solve, run_table1)
from .model import MilpModel, ModelBuilder, read_lp, write_lp
from .partition import (Partition, PartitionCell, SampleSet, adaptive_split,
                        grid_partition, summarize, voronoi_partition)
from .problems import (ConstraintSystem, LinearCost, OneNormCost, Tightening,
                       build_pp, build_rp, compute_tightening,
                       extract_solution, greedy_cover)
from .pwa import (PredictionModel, PwaModel, StageCost, build_prediction,
                  closed_loop, compile_ocp, enumerate_sequences,
                  lipschitz_constants, prediction_matrices, simulate_step)
from .solver import (LpProblem, MilpSolution, external_adapter,
                     solve_by_enumeration, solve_lp, solve_milp,
                     solve_with_fallback)

__version__ = "0.1.0"

__all__ = [
    "BoundContext", "Box", "ConstraintSystem", "DisturbanceGenerator",
    "ExperimentConfig", "LinearCost", "LpProblem", "MilpModel",
    "MilpSolution", "ModelBuilder", "OneNormCost", "Partition",
    "PartitionCell", "PerformanceInterval", "Polytope", "PredictionModel",
    "PwaModel", "RiskSpec", "SampleSet", "StageCost", "Tightening",
    "adaptive_split", "analytic_gap", "build_pp", "build_prediction",
    "build_rp", "closed_loop", "compile_ocp", "compute_tightening",
    "concentration_constants", "delta_continuity_interval", "emit",
    "enumerate_sequences", "external_adapter", "extract_solution",
    "generate_disturbances", "greedy_cover", "grid_partition",
    "hausdorff_exact", "linear_max", "lipschitz_constants",
    "monte_carlo_violation", "optimize_r", "partition_roughness",
    "performance_interval", "prediction_matrices", "read_lp",
    "required_samples", "run_closedloop", "run_fig2", "run_single_solve",
    "run_table1", "sigma_constant", "simulate_step", "solve_by_enumeration",
    "solve_lp", "solve_milp", "solve_with_fallback", "subset_discrepancy",
    "summarize", "vertices_2d", "voronoi_partition", "write_lp",
]
