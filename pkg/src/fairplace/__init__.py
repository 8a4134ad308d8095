"""Fair facility location under p-norm group objectives."""

from .errors import (
    FairplaceError,
    InfeasibleRounding,
    InvalidArgument,
    InvalidSolution,
    InvariantViolation,
    RangeError,
    ResourceLimit,
    UnsupportedConfiguration,
    Violation,
)
from .hierarchy import HierarchicalInstance, check_hierarchy, solve_hierarchical
from .instances import (
    Client,
    Facility,
    Instance,
    MetricSpace,
    NormParam,
    RandomParams,
    distance,
    gen_greedy_adversarial,
    gen_random,
    gen_star_lower_bound,
    line_instance,
    validate_instance,
)
from .line import LineRefinement, base_intervals, complete_assignment, expand_intervals
from .objective import CostBreakdown, Solution, group_cost_vector, nearest_assignment, total_cost
from .portfolio import Portfolio, build_portfolio, cover_lookup, representative_norms, transfer_ratio
from .refine import (
    RefinementChain,
    discounted_lookahead,
    greedy_strong_refine,
    increasing_refine,
    recurrence_bound,
    strong_refine,
    weak_refine,
)
from .solver import (
    FractionalSolution,
    approx_solve,
    brute_force_opt,
    filter_fractional,
    round_filtered,
    solve_relaxation,
)
from .tree import augment_branch_vertices, branch_and_linearize
from .verify import check_interval_tree, check_strong, check_weak, measure_ratios

__all__ = [
    "approx_solve",
    "augment_branch_vertices",
    "base_intervals",
    "branch_and_linearize",
    "brute_force_opt",
    "build_portfolio",
    "check_hierarchy",
    "check_interval_tree",
    "check_strong",
    "check_weak",
    "Client",
    "complete_assignment",
    "CostBreakdown",
    "cover_lookup",
    "discounted_lookahead",
    "distance",
    "expand_intervals",
    "Facility",
    "FairplaceError",
    "filter_fractional",
    "FractionalSolution",
    "gen_greedy_adversarial",
    "gen_random",
    "gen_star_lower_bound",
    "greedy_strong_refine",
    "group_cost_vector",
    "HierarchicalInstance",
    "increasing_refine",
    "InfeasibleRounding",
    "Instance",
    "InvalidArgument",
    "InvalidSolution",
    "InvariantViolation",
    "line_instance",
    "LineRefinement",
    "measure_ratios",
    "MetricSpace",
    "nearest_assignment",
    "NormParam",
    "Portfolio",
    "RandomParams",
    "RangeError",
    "recurrence_bound",
    "RefinementChain",
    "representative_norms",
    "ResourceLimit",
    "round_filtered",
    "Solution",
    "solve_hierarchical",
    "solve_relaxation",
    "strong_refine",
    "total_cost",
    "transfer_ratio",
    "UnsupportedConfiguration",
    "validate_instance",
    "Violation",
    "weak_refine",
]

__version__ = "0.1.0"
