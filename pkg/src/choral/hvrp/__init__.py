"""Min-max heterogeneous vehicle routing: model, exact solver, heuristic."""

from .exact import solve_exact
from .heuristic import solve_heuristic, solve_homogeneous_baseline
from .problem import (
    RouteMetrics,
    RoutingProblem,
    Solution,
    SolutionMetrics,
    SolveResult,
    TracePoint,
    ValidityReport,
    evaluate,
    route_accident_prob,
    route_cost,
    validate,
)

__all__ = [
    "RouteMetrics",
    "RoutingProblem",
    "Solution",
    "SolutionMetrics",
    "SolveResult",
    "TracePoint",
    "ValidityReport",
    "evaluate",
    "route_accident_prob",
    "route_cost",
    "solve_exact",
    "solve_heuristic",
    "solve_homogeneous_baseline",
    "validate",
]
