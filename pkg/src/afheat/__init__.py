"""Active Flux discretizations of the hyperbolic heat system in the diffusive scaling."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    FAMILIES_1D,
    FAMILIES_2D,
    ErrorReport,
    GridSpec1D,
    GridSpec2D,
    ModelParams,
    State1D,
    State2D,
    Variant,
    build_grid_1d,
    build_grid_2d,
    error_norms,
    project_initial_1d,
    project_initial_2d,
)
from .dirk import DEFAULT_TABLEAU, TimeStepPolicy, integrate  # noqa: E402
from .ops1d import assemble_operator_1d, rhs_1d  # noqa: E402
from .ops2d import assemble_operator_2d, rhs_js_2d  # noqa: E402

__all__ = [
    "FAMILIES_1D", "FAMILIES_2D", "ErrorReport", "GridSpec1D", "GridSpec2D", "ModelParams",
    "State1D", "State2D", "Variant", "build_grid_1d", "build_grid_2d", "error_norms",
    "project_initial_1d", "project_initial_2d", "DEFAULT_TABLEAU", "TimeStepPolicy", "integrate",
    "assemble_operator_1d", "rhs_1d", "assemble_operator_2d", "rhs_js_2d",
]
