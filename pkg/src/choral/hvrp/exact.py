"""Exhaustive small-instance solver.

Per robot, a dynamic program over task subsets gives the cheapest open-route
order for every subset; a vectorized scan over all K^n task assignments then
picks the capacity-feasible split minimizing (max route cost, total cost,
lexicographic routes). Guarded to n <= 10 tasks and 3 robots.
"""

from __future__ import annotations

import time

import numpy as np

from ..errors import ConfigurationError
from .problem import RoutingProblem, SolveResult, Solution, route_cost

MAX_TASKS = 10
MAX_ROBOTS = 3


def _subset_costs(costs: np.ndarray, n: int) -> np.ndarray:
    """G[mask, l]: cheapest cost of leaving node l, visiting every task in
    mask (bit i is node i+1), and ending at the depot."""
    G = np.empty((1 << n, n + 1))
    G[0] = costs[:, 0]
    for mask in range(1, 1 << n):
        best = np.full(n + 1, np.inf)
        m = mask
        while m:
            j = (m & -m).bit_length() - 1
            m &= m - 1
            np.minimum(best, costs[:, j + 1] + G[mask ^ (1 << j), j + 1], out=best)
        G[mask] = best
    return G


def _lex_order(costs: np.ndarray, G: np.ndarray, mask: int) -> tuple[int, ...]:
    """Lexicographically smallest task order achieving G[mask, 0].

    Greedy front-to-back: the smallest next task whose remainder still
    completes at the recorded optimum. Equality is exact because each
    candidate below is one of the terms G was minimized over.
    """
    order = []
    at = 0
    while mask:
        target = G[mask, at]
        m = mask
        while m:
            j = (m & -m).bit_length() - 1
            m &= m - 1
            rest = mask ^ (1 << j)
            if costs[at, j + 1] + G[rest, j + 1] == target:
                order.append(j + 1)
                at = j + 1
                mask = rest
                break
    return tuple(order)


def solve_exact(problem: RoutingProblem) -> SolveResult:
    """Optimal solution or a proven-infeasible result for small instances."""
    t0 = time.perf_counter()
    n = problem.n_tasks
    K = problem.n_robots
    if n > MAX_TASKS or K > MAX_ROBOTS:
        raise ConfigurationError(
            f"exact solver is limited to {MAX_TASKS} tasks and {MAX_ROBOTS} robots; "
            f"got n={n}, K={K}"
        )
    caps = np.array(problem.capacities)
    must_serve = not problem.allow_empty_routes
    if must_serve and n < K:
        return SolveResult(
            status="infeasible", solution=None, wall_time_s=time.perf_counter() - t0
        )
    if n == 0:
        return SolveResult(
            status="feasible",
            solution=Solution(tuple(() for _ in range(K))),
            wall_time_s=time.perf_counter() - t0,
        )

    combined = [np.asarray(m.combined, dtype=float) for m in problem.matrices]
    Gs = [_subset_costs(c, n) for c in combined]
    best = np.stack([G[:, 0] for G in Gs])
    best[:, 0] = 0.0  # an idle robot parks at the depot for free

    digits = (np.arange(K**n)[:, None] // (K ** np.arange(n))) % K  # (A, n)
    bits = 1 << np.arange(n)
    masks = np.stack([((digits == k) * bits).sum(axis=1) for k in range(K)], axis=1)
    rc = np.stack([best[k][masks[:, k]] for k in range(K)], axis=1)  # (A, K)
    feasible = (rc <= caps[None, :]).all(axis=1)
    if must_serve:
        feasible &= (masks != 0).all(axis=1)
    if not feasible.any():
        solo = np.array([[best[k][1 << t] for k in range(K)] for t in range(n)])
        stuck = tuple(t + 1 for t in range(n) if (solo[t] > caps).all())
        return SolveResult(
            status="infeasible",
            solution=None,
            unplaceable=stuck,
            wall_time_s=time.perf_counter() - t0,
        )

    obj = rc.max(axis=1)
    obj[~feasible] = np.inf
    floor = float(obj.min())
    # DP sums and fresh route sums associate differently; rescore everything
    # within an ulp-dominating band of the floor before the final comparison.
    band = 1e-9 * max(1.0, floor)
    best_key = None
    fallback_key = None
    for a in np.flatnonzero(feasible & (obj <= floor + band)):
        routes = tuple(
            _lex_order(combined[k], Gs[k], int(masks[a, k])) for k in range(K)
        )
        fresh = [route_cost(combined[k], routes[k]) for k in range(K)]
        key = (max(fresh), sum(fresh), routes)
        if fallback_key is None or key < fallback_key:
            fallback_key = key
        if any(c > cap for c, cap in zip(fresh, caps)):
            continue
        if best_key is None or key < best_key:
            best_key = key
    if best_key is None:
        best_key = fallback_key
    return SolveResult(
        status="feasible",
        solution=Solution(best_key[2]),
        wall_time_s=time.perf_counter() - t0,
    )
