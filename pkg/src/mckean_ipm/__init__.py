"""Particle simulation and fixed-point search for invariant probability
measures of path-dependent McKean-Vlasov SDEs."""
from .coefficients import (
    BUILTIN_MODELS,
    CoefficientModel,
    SpeedMeasureOracle,
    StructuralConstants,
    builtin_model,
    custom_model,
    oracle_density,
    oracle_moment,
    oracle_moment_finite,
    probe_h3,
)
from .errors import (
    CapExceededError,
    ConfigError,
    DomainError,
    InvalidInputError,
    MckeanIPMError,
    NumericalBlowupError,
    OutOfRangeError,
    PreconditionError,
    ShapeError,
)
from .hypothesis import (
    CHI,
    FeasibilityPoint,
    FeasibilityReport,
    admissible_m0,
    check_membership,
    find_feasible,
    moment_bound,
)
from .ipm_solver import SolverConfig, noise_floor, solve_ipm, stationarity_check
from .kernels import BACKEND
from .measures import EmpiricalSegmentMeasure, moment, wasserstein_1d, wasserstein_p
from .segments import SegmentPath, TimeGrid, TrajectoryBuffer
from .simulator import SimConfig, init_ensemble, run, simulate, step_frozen, step_mckean

__version__ = "0.1.0"
