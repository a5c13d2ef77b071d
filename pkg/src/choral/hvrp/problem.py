"""Routing problem model: one cost matrix per robot, min-max objective.

Routes are ordered task lists; the depot prefix and suffix are implicit.
Route cost is the left-to-right sum of matrix entries along depot -> tasks ->
depot, and an empty route costs exactly 0. Both solvers and the evaluator
share that arithmetic so objectives compare bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..costmodel import CostMatrix, RobotProfile
from ..errors import ConfigurationError, InvalidSolutionError


@dataclass(frozen=True)
class RoutingProblem:
    """Tasks 1..n around depot node 0, a cost matrix per robot, and a cap
    on each robot's combined route cost (inf when unconstrained).

    ``allow_empty_routes=False`` additionally requires every robot to serve
    at least one task (a model variant; with fewer tasks than robots the
    problem becomes infeasible outright)."""

    matrices: tuple[CostMatrix, ...]
    capacities: tuple[float, ...] = ()
    allow_empty_routes: bool = True

    def __post_init__(self):
        if not self.matrices:
            raise ConfigurationError("a problem needs at least one robot")
        object.__setattr__(self, "matrices", tuple(self.matrices))
        shape = self.matrices[0].combined.shape
        if len(shape) != 2 or shape[0] != shape[1] or shape[0] < 1:
            raise ConfigurationError(f"cost matrices must be square, got {shape}")
        for m in self.matrices:
            if m.combined.shape != shape:
                raise ConfigurationError(
                    f"robot {m.robot.id}: matrix shape {m.combined.shape} != {shape}"
                )
            if np.isnan(m.combined).any() or (m.combined < 0).any():
                raise ConfigurationError(f"robot {m.robot.id}: costs must be >= 0")
            if np.diagonal(m.combined).any():
                raise ConfigurationError(f"robot {m.robot.id}: nonzero cost diagonal")
        caps = self.capacities
        if not caps:
            caps = tuple(
                m.robot.capacity if m.robot.capacity is not None else float("inf")
                for m in self.matrices
            )
        else:
            caps = tuple(float(c) for c in caps)
        if len(caps) != len(self.matrices):
            raise ConfigurationError("one capacity per robot required")
        if any(c <= 0 for c in caps):
            raise ConfigurationError("capacities must be > 0")
        object.__setattr__(self, "capacities", caps)

    @property
    def n_tasks(self) -> int:
        return self.matrices[0].combined.shape[0] - 1

    @property
    def n_robots(self) -> int:
        return len(self.matrices)

    @classmethod
    def from_arrays(
        cls,
        costs,
        capacities=None,
        robot_ids: list[str] | None = None,
    ) -> "RoutingProblem":
        """Problem from bare cost arrays: unit velocity, no safety term.

        The arrays double as time and distance so synthetic instances still
        evaluate; accident probabilities come out zero.
        """
        mats = []
        for k, c in enumerate(costs):
            c = np.array(c, dtype=float)
            np.fill_diagonal(c, 0.0)
            c.setflags(write=False)
            zero = np.zeros_like(c)
            zero.setflags(write=False)
            rid = robot_ids[k] if robot_ids is not None else f"r{k}"
            mats.append(
                CostMatrix(
                    robot=RobotProfile(id=rid, nominal_velocity=1.0, alpha=0.0),
                    combined=c,
                    time_s=c,
                    safety_prob=zero,
                    trav_exp=zero,
                    coll_exp=zero,
                    distance=c,
                    task_ids=[None] + list(range(1, c.shape[0])),
                )
            )
        return cls(tuple(mats), tuple(capacities) if capacities is not None else ())

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "robots": [m.robot.to_dict() for m in self.matrices],
            "capacities": [None if np.isinf(c) else c for c in self.capacities],
            "allow_empty_routes": self.allow_empty_routes,
            "matrices": [m.to_dict() for m in self.matrices],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RoutingProblem":
        robots = [RobotProfile.from_dict(r) for r in d["robots"]]
        mats = tuple(
            CostMatrix.from_dict(md, robot) for md, robot in zip(d["matrices"], robots)
        )
        caps = tuple(float("inf") if c is None else float(c) for c in d["capacities"])
        return cls(mats, caps, d.get("allow_empty_routes", True))


@dataclass(frozen=True)
class Solution:
    """One ordered task tuple per robot; a robot may stay at the depot."""

    routes: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "routes", tuple(tuple(r) for r in self.routes))

    def decision_matrix(self, robot: int, n_nodes: int) -> np.ndarray:
        """Arc indicator x_ij for one robot, depot loop excluded."""
        x = np.zeros((n_nodes, n_nodes), dtype=np.int8)
        route = self.routes[robot]
        prev = 0
        for node in route:
            x[prev, node] = 1
            prev = node
        if route:
            x[prev, 0] = 1
        return x

    def to_dict(self) -> dict:
        return {"schema_version": 1, "routes": [list(r) for r in self.routes]}

    @classmethod
    def from_dict(cls, d: dict) -> "Solution":
        return cls(tuple(tuple(int(v) for v in r) for r in d["routes"]))


def route_cost(matrix: np.ndarray, route) -> float:
    """Left-to-right cost of depot -> route -> depot; empty route is free."""
    total = 0.0
    prev = 0
    for node in route:
        total += float(matrix[prev, node])
        prev = node
    if prev:
        total += float(matrix[prev, 0])
    return total


def route_accident_prob(edge_prob: np.ndarray, route) -> float:
    """1 - product of per-edge survival along the route."""
    survival = 1.0
    prev = 0
    for node in route:
        survival *= 1.0 - float(edge_prob[prev, node])
        prev = node
    if prev:
        survival *= 1.0 - float(edge_prob[prev, 0])
    return 1.0 - survival


@dataclass(frozen=True)
class ValidityReport:
    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate(problem: RoutingProblem, solution: Solution) -> ValidityReport:
    """Check visit-once, node bounds, route count, and capacities; every
    violation is reported with its location."""
    v: list[str] = []
    K = problem.n_robots
    n = problem.n_tasks
    routes = solution.routes
    if len(routes) != K:
        v.append(f"expected {K} routes, got {len(routes)}")
    seen: dict[int, list[int]] = {}
    clean: list[bool] = []
    for k, route in enumerate(routes):
        ok = True
        for pos, node in enumerate(route):
            if not isinstance(node, (int, np.integer)):
                v.append(f"route {k} position {pos}: node {node!r} is not an integer")
                ok = False
            elif not 1 <= node <= n:
                v.append(f"route {k} position {pos}: node {node} outside 1..{n}")
                ok = False
            else:
                seen.setdefault(int(node), []).append(k)
        clean.append(ok)
    for t in range(1, n + 1):
        ks = seen.get(t, [])
        if not ks:
            v.append(f"task {t} never visited")
        elif len(ks) > 1:
            v.append(f"task {t} visited {len(ks)} times (routes {', '.join(map(str, ks))})")
    for k in range(min(K, len(routes))):
        if not clean[k]:
            continue
        cost = route_cost(problem.matrices[k].combined, routes[k])
        cap = problem.capacities[k]
        if cost > cap:
            v.append(
                f"robot {problem.matrices[k].robot.id}: route cost {cost:.12g} "
                f"exceeds capacity {cap:.12g}"
            )
    if not problem.allow_empty_routes:
        for k in range(min(K, len(routes))):
            if not routes[k]:
                v.append(f"robot {problem.matrices[k].robot.id}: empty route forbidden")
    return ValidityReport(tuple(v))


@dataclass(frozen=True)
class RouteMetrics:
    robot_id: str
    cost: float
    time_s: float
    distance: float
    accident_prob: float
    trav_prob: float
    coll_prob: float

    def to_dict(self) -> dict:
        return {
            "robot": self.robot_id,
            "cost": self.cost,
            "time_s": self.time_s,
            "distance": self.distance,
            "accident_prob": self.accident_prob,
            "trav_prob": self.trav_prob,
            "coll_prob": self.coll_prob,
        }


@dataclass(frozen=True)
class SolutionMetrics:
    objective: float
    total_cost: float
    per_robot: tuple[RouteMetrics, ...]

    @property
    def max_time(self) -> float:
        return max(m.time_s for m in self.per_robot)

    @property
    def max_distance(self) -> float:
        return max(m.distance for m in self.per_robot)

    @property
    def max_trav_prob(self) -> float:
        return max(m.trav_prob for m in self.per_robot)

    @property
    def max_coll_prob(self) -> float:
        return max(m.coll_prob for m in self.per_robot)

    @property
    def max_accident_prob(self) -> float:
        return max(m.accident_prob for m in self.per_robot)

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "total_cost": self.total_cost,
            "max_time_s": self.max_time,
            "max_distance": self.max_distance,
            "max_trav_prob": self.max_trav_prob,
            "max_coll_prob": self.max_coll_prob,
            "max_accident_prob": self.max_accident_prob,
            "per_robot": [m.to_dict() for m in self.per_robot],
        }


def evaluate(problem: RoutingProblem, solution: Solution) -> SolutionMetrics:
    """Objective (max route cost) plus per-robot time, distance, and
    accident probabilities. Refuses invalid solutions."""
    report = validate(problem, solution)
    if not report.ok:
        raise InvalidSolutionError(
            "cannot evaluate an invalid solution:\n" + "\n".join(report.violations),
            report.violations,
        )
    per = []
    for k, m in enumerate(problem.matrices):
        r = solution.routes[k]
        trav = route_cost(m.trav_exp, r)
        coll = route_cost(m.coll_exp, r)
        per.append(
            RouteMetrics(
                robot_id=m.robot.id,
                cost=route_cost(m.combined, r),
                time_s=route_cost(m.time_s, r),
                distance=route_cost(m.distance, r),
                accident_prob=route_accident_prob(m.safety_prob, r),
                trav_prob=float(-np.expm1(-trav)),
                coll_prob=float(-np.expm1(-coll)),
            )
        )
    costs = [m.cost for m in per]
    return SolutionMetrics(
        objective=max(costs), total_cost=sum(costs), per_robot=tuple(per)
    )


@dataclass(frozen=True)
class TracePoint:
    """Best objective at a point in the search, for anytime curves."""

    iteration: int
    elapsed_s: float
    objective: float


@dataclass(frozen=True)
class SolveResult:
    status: str  # "feasible" | "infeasible"
    solution: Solution | None
    unplaceable: tuple[int, ...] = ()
    iterations: int = 0
    wall_time_s: float = 0.0
    trace: tuple[TracePoint, ...] = field(default=(), repr=False)

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"
