"""Exception types shared across the package."""


class PartccError(Exception):
    """Base class for all package errors."""


class Infeasible(PartccError):
    """The (sub)problem has no feasible point."""


class Unbounded(PartccError):
    """The objective is unbounded over the feasible set."""


class IterationLimit(PartccError):
    """Solver iteration budget exhausted."""


class TimeLimit(PartccError):
    """Solver wall-time budget exhausted."""


class DimensionUnsupported(PartccError):
    """Operation only available in low dimension (1-D / 2-D)."""


class EmptySet(PartccError):
    """Operation requires a non-empty set."""


class CombinatorialBlowup(PartccError):
    """Enumeration size exceeds the configured cap."""


class NoInvertibleSubmatrix(PartccError):
    """No square row-submatrix of the given matrix is invertible."""


class DegenerateClustering(PartccError):
    """Fewer distinct points than requested clusters."""


class SampleOutsideDomain(PartccError):
    """A sample was not assigned to any partition cell."""


class NotAProbabilityVector(PartccError):
    """Vector entries do not form a probability distribution."""


class OrderingViolated(PartccError):
    """Relaxed optimum exceeds tightened optimum; signals a modeling bug."""


class DegenerateEpsilon(PartccError):
    """Risk level coincides with a subset mass sum; continuity interval undefined."""


class CoverageImpossible(PartccError):
    """No cell selection can reach the required probability mass."""


class ModelTooLarge(PartccError):
    """Binary count exceeds the configured model-size cap."""


class NoActiveRegion(PartccError):
    """A point falls outside every region of the piecewise-affine tiling."""


class SolverInfeasible(PartccError):
    """A receding-horizon step produced an infeasible program."""


class EngineUnavailable(PartccError):
    """External solver engine not configured or not runnable."""


class ConfigError(PartccError):
    """Invalid experiment configuration."""


class IoError(PartccError):
    """File emission failed."""
