"""Solver and simulator for optimal exploration of an exhaustible resource.

The state is (x, R): unexplored area and proven reserves.  :func:`solve`
returns the value surface and the critical reserve frontier R*(x), and
:func:`simulate_path` / :func:`run_ensemble` follow the optimal
consume-then-explore strategy on it.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AdmissibilityError,
    ConvergenceWarning,
    DomainError,
    FrontierNotBracketed,
    GridError,
    InsufficientData,
    NonMonotoneFrontier,
    NoRoot,
    ParseError,
    RegionError,
    ResExploreError,
    TimeOutOfRange,
)
from .model import ModelParams, full_information_value, hotelling_price, hotelling_value, validate  # noqa: E402
from .solver import (  # noqa: E402
    Frontier,
    SolverGrid,
    ValueSurface,
    apply_exploration_operator,
    default_grid,
    frontier_at_zero,
    frontier_indicator,
    price_at,
    solve,
    value_at,
)
from .diagnostics import ResidualReport, hjb_residuals  # noqa: E402
from .dpp import dpp_fixed_point  # noqa: E402
from .simulate import Path, PathEvent, RngStream, consumption_segment, exploration_episode, sample_path, simulate_path  # noqa: E402
from .ensemble import (  # noqa: E402
    EnsembleStats,
    conditional_growth_check,
    exhaustion_jump_check,
    martingale_test,
    run_ensemble,
)
from .config import RunConfig, parse_config  # noqa: E402

__all__ = [
    "__version__",
    "AdmissibilityError", "ConvergenceWarning", "DomainError", "FrontierNotBracketed", "GridError",
    "InsufficientData", "NonMonotoneFrontier", "NoRoot", "ParseError", "RegionError",
    "ResExploreError", "TimeOutOfRange",
    "ModelParams", "validate", "hotelling_value", "hotelling_price", "full_information_value",
    "SolverGrid", "ValueSurface", "Frontier", "default_grid", "solve", "frontier_at_zero",
    "apply_exploration_operator", "frontier_indicator", "value_at", "price_at",
    "ResidualReport", "hjb_residuals", "dpp_fixed_point",
    "Path", "PathEvent", "RngStream", "consumption_segment", "exploration_episode",
    "simulate_path", "sample_path",
    "EnsembleStats", "run_ensemble", "martingale_test", "exhaustion_jump_check",
    "conditional_growth_check",
    "RunConfig", "parse_config",
]
