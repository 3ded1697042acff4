"""Kinetic chemotaxis in slab geometry and its Keller-Segel diffusion limit."""

__version__ = "0.1.0"

from .asymptotics import (  # noqa: E402
    DecompositionReport, RateFit, corrector_u1, decompose_remainders, fit_rate, theorem_bounds_report,
)
from .config import StudyConfig, load_config, parse_config  # noqa: E402
from .errors import (  # noqa: E402
    ChemoslabError, ConfigurationError, ConvergenceWarning, DimensionError, SolverError,
    StabilityWarning, ValidationError,
)
from .keller_segel import KSState, KSTrajectory, run_ks, step_ks  # noqa: E402
from .kinetic import (  # noqa: E402
    KineticState, KineticTrajectory, SolverOptions, relaxation_invert, run_kinetic, step_kinetic,
    transport_sweep,
)
from .model import (  # noqa: E402
    DEFAULT_SCENARIO, ProblemSetup, build_problem, limit_coefficients, validate_compatibility,
)
from .parabolic import TridiagonalSystem, step_parabolic, steady_state_solve, thomas_solve  # noqa: E402
from .quadrature_mesh import (  # noqa: E402
    discrete_norm, gauss_legendre, make_mesh, make_timegrid, velocity_average,
)
from .study import StudyResult, run_study, write_outputs  # noqa: E402

__all__ = [
    "ChemoslabError", "ConfigurationError", "ConvergenceWarning", "DEFAULT_SCENARIO", "DecompositionReport",
    "DimensionError", "KSState", "KSTrajectory", "KineticState", "KineticTrajectory", "ProblemSetup", "RateFit",
    "SolverError", "SolverOptions", "StabilityWarning", "StudyConfig", "StudyResult", "TridiagonalSystem",
    "ValidationError", "build_problem", "corrector_u1", "decompose_remainders", "discrete_norm", "fit_rate",
    "gauss_legendre", "limit_coefficients", "load_config", "make_mesh", "make_timegrid", "parse_config",
    "relaxation_invert", "run_kinetic", "run_ks", "run_study", "step_kinetic", "step_ks", "step_parabolic",
    "steady_state_solve", "theorem_bounds_report", "thomas_solve", "transport_sweep", "validate_compatibility",
    "velocity_average", "write_outputs",
]
