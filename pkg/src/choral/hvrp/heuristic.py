"""Anytime local-search solver for the min-max routing problem.

Construction is regret-based parallel cheapest insertion under the capacity
caps. Improvement is randomized first-improvement descent over four
neighborhoods (inter-route relocate, inter-route swap, intra-route 2-opt,
or-opt segment move), accepting moves that lexicographically lower
(max route cost, total cost). After 2000 rejected moves in a row the search
restarts from the incumbent with three random relocates. The budget is wall
clock or an iteration count; with an iteration count the run is fully
deterministic in (problem, budget, seed).

Candidate moves are screened with O(1) cost deltas, but every acceptance
recomputes the touched routes as fresh left-to-right sums, so the incumbent
always carries the exact costs validate() will see.

When the problem forbids empty routes, construction tops up idle robots with
a donated task and moves that would empty their donor are skipped; an
infeasible status then means construction failed, not a proof.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import replace

import numpy as np

from ..errors import ConfigurationError, InvalidSolutionError
from .problem import (
    RoutingProblem,
    Solution,
    SolveResult,
    TracePoint,
    route_cost,
    validate,
)

_STAGNATION_LIMIT = 2000
_KICK_MOVES = 3
_CONSTRUCT_ATTEMPTS = 8
_NEIGHBORS = 12


def _best_insertion(Ck, route, t, cap):
    """Cheapest feasible insertion of t; (new_route, fresh_cost) or None."""
    best = None
    for pos in range(len(route) + 1):
        a = route[pos - 1] if pos else 0
        b = route[pos] if pos < len(route) else 0
        delta = Ck[a, t] + Ck[t, b] - Ck[a, b]
        if best is None or delta < best[0]:
            best = (delta, pos)
    cand = route[: best[1]] + [t] + route[best[1] :]
    fresh = route_cost(Ck, cand)
    if fresh > cap:
        return None
    return cand, fresh


def _eject_repair(CM, screen, routes, cost, unassigned):
    """Place one stuck task by bumping a routed task somewhere else."""
    K = len(routes)
    for t in list(unassigned):
        for k in range(K):
            r = routes[k]
            for q in range(len(r)):
                u = r[q]
                opened = _best_insertion(CM[k], r[:q] + r[q + 1 :], t, screen[k])
                if opened is None:
                    continue
                for kk in range(K):
                    host = opened[0] if kk == k else routes[kk]
                    landed = _best_insertion(CM[kk], host, u, screen[kk])
                    if landed is None:
                        continue
                    if kk == k:
                        routes[k] = landed[0]
                        cost[k] = landed[1]
                    else:
                        routes[k] = opened[0]
                        cost[k] = opened[1]
                        routes[kk] = landed[0]
                        cost[kk] = landed[1]
                    unassigned.remove(t)
                    return True
    return False


def _fill_empty(CM, screen, routes, cost):
    """Give every empty route one task pulled from a multi-task route,
    picking the donor/task pair whose two fresh costs are lexicographically
    smallest. False when capacities block every candidate."""
    K = len(routes)
    for k in range(K):
        if routes[k]:
            continue
        best = None
        for kd in range(K):
            if kd == k or len(routes[kd]) < 2:
                continue
            r = routes[kd]
            for q, t in enumerate(r):
                fd = route_cost(CM[kd], r[:q] + r[q + 1 :])
                if fd > screen[kd]:
                    continue
                fk = route_cost(CM[k], [t])
                if fk > screen[k]:
                    continue
                key = (max(fd, fk), fd + fk, kd, q)
                if best is None or key < best[0]:
                    best = (key, kd, q, t, fd, fk)
        if best is None:
            return False
        _, kd, q, t, fd, fk = best
        routes[kd] = routes[kd][:q] + routes[kd][q + 1 :]
        cost[kd] = fd
        routes[k] = [t]
        cost[k] = fk
    return True


def _construct(CM, screen, rng, randomized):
    """One regret-insertion pass; returns (routes, costs, unplaced)."""
    K = len(CM)
    n = CM[0].shape[0] - 1
    routes: list[list[int]] = [[] for _ in range(K)]
    cost = [0.0] * K
    unassigned = list(range(1, n + 1))
    best_d = np.full((K, n + 1), np.inf)
    best_p = np.zeros((K, n + 1), dtype=np.int64)
    stale = [True] * K

    while unassigned:
        ts = np.array(unassigned)
        for k in range(K):
            if not stale[k]:
                continue
            r = routes[k]
            heads = np.array([0] + r)
            tails = np.array(r + [0])
            Ck = CM[k]
            bridge = Ck[heads, tails][:, None]
            delta = Ck[np.ix_(heads, ts)] + Ck[np.ix_(ts, tails)].T - bridge
            delta = np.where(cost[k] + delta <= screen[k], delta, np.inf)
            pos = delta.argmin(axis=0)
            best_d[k, ts] = delta[pos, np.arange(len(ts))]
            best_p[k, ts] = pos
            stale[k] = False

        D = best_d[:, ts]
        carr = np.array(cost)
        k_top = int(carr.argmax())
        if K > 1:
            others = carr[np.arange(K) != k_top].max()
        else:
            others = 0.0
        excl = np.where(np.arange(K) == k_top, others, carr.max())[:, None]
        new_max = np.maximum(carr[:, None] + D, excl)

        U = len(ts)
        b_max = np.full(U, np.inf)
        b_d = np.full(U, np.inf)
        b_k = np.zeros(U, dtype=np.int64)
        s_max = np.full(U, np.inf)
        s_d = np.full(U, np.inf)
        for k in range(K):
            nm, nd = new_max[k], D[k]
            better = (nm < b_max) | ((nm == b_max) & (nd < b_d))
            runner = ~better & ((nm < s_max) | ((nm == s_max) & (nd < s_d)))
            s_max = np.where(better, b_max, np.where(runner, nm, s_max))
            s_d = np.where(better, b_d, np.where(runner, nd, s_d))
            b_k = np.where(better, k, b_k)
            b_max = np.where(better, nm, b_max)
            b_d = np.where(better, nd, b_d)
        placeable = b_d < np.inf
        if not placeable.any():
            if _eject_repair(CM, screen, routes, cost, unassigned):
                stale = [True] * K
                continue
            break

        if randomized:
            options = np.flatnonzero(placeable)
            t = int(ts[options[rng.randrange(len(options))]])
            ks = [k for k in range(K) if best_d[k, t] < np.inf]
            k_star = ks[rng.randrange(len(ks))]
        else:
            with np.errstate(invalid="ignore"):
                r1 = s_max - b_max
                r2 = s_d - b_d
            r1 = np.where(np.isnan(r1), np.inf, r1)  # forced placement first
            r2 = np.where(np.isnan(r2), np.inf, r2)
            r1 = np.where(placeable, r1, -np.inf)
            pick = int(np.lexsort((ts, b_d, b_max, -r2, -r1))[0])
            t = int(ts[pick])
            k_star = int(b_k[pick])

        routes[k_star].insert(int(best_p[k_star, t]), t)
        cost[k_star] = route_cost(CM[k_star], routes[k_star])
        unassigned.remove(t)
        stale[k_star] = True
    return routes, cost, unassigned


def _initial(CM, screen, rng, must_serve):
    """Deterministic regret pass, then randomized retries if tasks stuck.
    None when every attempt placed all tasks but an empty route could not
    be filled under the caps."""
    best = None
    for attempt in range(_CONSTRUCT_ATTEMPTS):
        routes, cost, left = _construct(CM, screen, rng, randomized=attempt > 0)
        if not left:
            if not must_serve or _fill_empty(CM, screen, routes, cost):
                return routes, cost, []
            continue
        if best is None or len(left) < len(best[2]):
            best = (routes, cost, left)
    return best


def _neighbor_lists(CM, n):
    """Per task, nearest other tasks by team-averaged symmetric cost."""
    avg = CM[0].copy()
    for c in CM[1:]:
        avg += c
    sym = avg + avg.T
    limit = min(_NEIGHBORS, n - 1)
    nbr: list[list[int]] = [[]]
    idx = np.arange(n + 1)
    for t in range(1, n + 1):
        row = sym[t].copy()
        row[0] = np.inf
        row[t] = np.inf
        nbr.append([int(v) for v in np.lexsort((idx, row))[:limit]])
    return nbr


def solve_heuristic(
    problem: RoutingProblem,
    budget_s: float | None = None,
    *,
    budget_iters: int | None = None,
    seed: int = 0,
    warm_start: Solution | None = None,
    early_stop_kicks: int | None = None,
) -> SolveResult:
    """Best solution found within the budget, with its anytime trace.

    ``early_stop_kicks`` ends the run once that many consecutive restarts
    fail to improve the incumbent (for batch runs where the tail of the
    budget buys nothing).
    """
    t0 = time.perf_counter()
    if budget_s is None and budget_iters is None:
        raise ConfigurationError("a time or iteration budget is required")
    if budget_s is not None and budget_s <= 0:
        raise ConfigurationError("budget_s must be > 0")
    if budget_iters is not None and budget_iters <= 0:
        raise ConfigurationError("budget_iters must be > 0")

    K = problem.n_robots
    n = problem.n_tasks
    must_serve = not problem.allow_empty_routes
    if must_serve and n < K:
        return SolveResult(
            status="infeasible", solution=None, wall_time_s=time.perf_counter() - t0
        )
    if n == 0:
        sol = Solution(tuple(() for _ in range(K)))
        return SolveResult(
            status="feasible",
            solution=sol,
            wall_time_s=time.perf_counter() - t0,
            trace=(TracePoint(0, time.perf_counter() - t0, 0.0),),
        )

    caps = [float(c) for c in problem.capacities]
    # screening threshold: a hair under the cap so delta rounding can never
    # admit a route that a fresh sum rejects
    screen = [c - 1e-9 * (1.0 + abs(c)) if math.isfinite(c) else c for c in caps]
    CM = [np.asarray(m.combined, dtype=float) for m in problem.matrices]
    rng = random.Random(seed)

    if warm_start is not None:
        report = validate(problem, warm_start)
        if not report.ok:
            raise InvalidSolutionError(
                "warm start rejected:\n" + "\n".join(report.violations),
                report.violations,
            )
        routes = [list(r) for r in warm_start.routes]
        cost = [route_cost(CM[k], routes[k]) for k in range(K)]
    else:
        init = _initial(CM, screen, rng, must_serve)
        if init is None:
            return SolveResult(
                status="infeasible",
                solution=None,
                wall_time_s=time.perf_counter() - t0,
            )
        routes, cost, left = init
        if left:
            return SolveResult(
                status="infeasible",
                solution=None,
                unplaceable=tuple(sorted(left)),
                wall_time_s=time.perf_counter() - t0,
            )

    nbr = _neighbor_lists(CM, n)
    CL = [c.tolist() for c in CM]
    where_k = [0] * (n + 1)
    where_i = [0] * (n + 1)

    def reindex(k: int) -> None:
        for idx, node in enumerate(routes[k]):
            where_k[node] = k
            where_i[node] = idx

    for k in range(K):
        reindex(k)

    def walk(k: int, seq) -> float:
        Ck = CL[k]
        total = 0.0
        prev = 0
        for node in seq:
            total += Ck[prev][node]
            prev = node
        if prev:
            total += Ck[prev][0]
        return total

    cur_max = max(cost)
    cur_tot = sum(cost)
    best_routes = [r[:] for r in routes]
    best_cost = cost[:]
    best_max, best_tot = cur_max, cur_tot
    trace = [TracePoint(0, time.perf_counter() - t0, cur_max)]

    it = 0
    stagnant = 0
    kicks_since_best = 0
    rnd = rng.random
    rri = rng.randrange

    def settle() -> None:
        """Refresh incumbents after an accepted move (costs already fresh)."""
        nonlocal cur_max, cur_tot, best_max, best_tot, stagnant, kicks_since_best
        cur_max = max(cost)
        cur_tot = sum(cost)
        stagnant = 0
        if cur_max < best_max or (cur_max == best_max and cur_tot < best_tot):
            best_max, best_tot = cur_max, cur_tot
            for k in range(K):
                best_routes[k] = routes[k][:]
            best_cost[:] = cost
            trace.append(TracePoint(it, time.perf_counter() - t0, cur_max))
            kicks_since_best = 0

    def accept1(k: int, cand: list[int], new_k: float) -> bool:
        """Single-route candidate with its fresh cost; commit if improving."""
        if new_k > caps[k]:
            return False
        new_max = new_k
        for kk in range(K):
            if kk != k and cost[kk] > new_max:
                new_max = cost[kk]
        new_tot = cur_tot - cost[k] + new_k
        if not (new_max < cur_max or (new_max == cur_max and new_tot < cur_tot)):
            return False
        routes[k] = cand
        cost[k] = new_k
        reindex(k)
        settle()
        return True

    def confirm2(ka: int, kb: int) -> bool:
        """Both routes already mutated; commit on fresh sums or ask revert."""
        fa = walk(ka, routes[ka])
        fb = walk(kb, routes[kb])
        if fa > caps[ka] or fb > caps[kb]:
            return False
        new_max = fa if fa > fb else fb
        for kk in range(K):
            if kk != ka and kk != kb and cost[kk] > new_max:
                new_max = cost[kk]
        new_tot = cur_tot - cost[ka] - cost[kb] + fa + fb
        if not (new_max < cur_max or (new_max == cur_max and new_tot < cur_tot)):
            return False
        cost[ka] = fa
        cost[kb] = fb
        reindex(ka)
        reindex(kb)
        settle()
        return True

    while True:
        if budget_iters is not None and it >= budget_iters:
            break
        if budget_s is not None and (it & 255) == 0 and time.perf_counter() - t0 >= budget_s:
            break
        it += 1

        if stagnant >= _STAGNATION_LIMIT:
            kicks_since_best += 1
            if early_stop_kicks is not None and kicks_since_best >= early_stop_kicks:
                break
            if kicks_since_best % 3 == 0:
                fresh_r, fresh_c, left = _construct(CM, screen, rng, randomized=True)
                if not left and must_serve and not _fill_empty(CM, screen, fresh_r, fresh_c):
                    left = True
                if not left:
                    for k in range(K):
                        routes[k] = fresh_r[k]
                        cost[k] = fresh_c[k]
                        reindex(k)
                    cur_max = max(cost)
                    cur_tot = sum(cost)
                    stagnant = 0
                    continue
            if kicks_since_best & 1:  # re-anchor at the incumbent every other kick
                for k in range(K):
                    routes[k] = best_routes[k][:]
                    cost[k] = best_cost[k]
                    reindex(k)
            for _ in range(_KICK_MOVES):
                if rnd() < 0.5:  # pull from the bottleneck route when possible
                    k1 = 0
                    for k in range(1, K):
                        if cost[k] > cost[k1]:
                            k1 = k
                    if not routes[k1]:
                        continue
                    t = routes[k1][rri(len(routes[k1]))]
                else:
                    t = rri(n) + 1
                    k1 = where_k[t]
                k2 = rri(K)
                r1 = routes[k1]
                if must_serve and k2 != k1 and len(r1) < 2:
                    continue
                i = where_i[t]
                if k2 == k1:
                    if len(r1) < 2:
                        continue
                    r1.pop(i)
                    p = rri(len(r1) + 1)
                    r1.insert(p, t)
                    c1 = walk(k1, r1)
                    if c1 > screen[k1]:
                        r1.pop(p)
                        r1.insert(i, t)
                        continue
                    cost[k1] = c1
                    reindex(k1)
                else:
                    r2 = routes[k2]
                    j = rri(len(r2) + 1)
                    r1.pop(i)
                    r2.insert(j, t)
                    c1 = walk(k1, r1)
                    c2 = walk(k2, r2)
                    # dropping a task can raise a route's cost when the
                    # matrix violates the triangle inequality, so screen both
                    if c1 > screen[k1] or c2 > screen[k2]:
                        r2.pop(j)
                        r1.insert(i, t)
                        continue
                    cost[k1] = c1
                    cost[k2] = c2
                    reindex(k1)
                    reindex(k2)
            cur_max = max(cost)
            cur_tot = sum(cost)
            stagnant = 0
            continue

        if rnd() < 0.5:  # work on the bottleneck route half the time
            s = 0
            top = cost[0]
            for k in range(1, K):
                if cost[k] > top:
                    top = cost[k]
                    s = k
        else:
            s = rri(K)
        rs = routes[s]
        if not rs:
            for off in range(1, K + 1):
                s2 = (s + off) % K
                if routes[s2]:
                    s = s2
                    rs = routes[s]
                    break
        L = len(rs)
        i = rri(L)
        t = rs[i]
        dice = rnd()
        accepted = False

        if dice < 0.35:  # relocate
            nb = nbr[t]
            if nb and rnd() < 0.6:
                v = nb[rri(len(nb))]
                k2 = where_k[v]
                j = where_i[v] + 1
            else:
                k2 = rri(K)
                j = -1  # uniform position drawn below, against the right list
            if k2 == s:
                cand = rs[:i] + rs[i + 1 :]
                if j < 0:
                    j = rri(len(cand) + 1)
                elif j > i:
                    j -= 1
                if j != i:
                    cand.insert(j, t)
                    new_s = walk(s, cand)
                    if new_s <= screen[s]:
                        accepted = accept1(s, cand, new_s)
            elif not must_serve or L > 1:
                rt = routes[k2]
                if j < 0:
                    j = rri(len(rt) + 1)
                Cs = CL[s]
                Ck = CL[k2]
                a = rs[i - 1] if i else 0
                b = rs[i + 1] if i + 1 < L else 0
                new_s = cost[s] - Cs[a][t] - Cs[t][b] + Cs[a][b]
                x = rt[j - 1] if j else 0
                y = rt[j] if j < len(rt) else 0
                new_k = cost[k2] + Ck[x][t] + Ck[t][y] - Ck[x][y]
                if new_k <= screen[k2] and new_s <= screen[s]:
                    new_max = new_s if new_s > new_k else new_k
                    for kk in range(K):
                        if kk != s and kk != k2 and cost[kk] > new_max:
                            new_max = cost[kk]
                    new_tot = cur_tot - cost[s] - cost[k2] + new_s + new_k
                    if new_max < cur_max or (new_max == cur_max and new_tot < cur_tot):
                        rs.pop(i)
                        rt.insert(j, t)
                        accepted = confirm2(s, k2)
                        if not accepted:
                            rt.pop(j)
                            rs.insert(i, t)

        elif dice < 0.6:  # swap
            nb = nbr[t]
            if nb and rnd() < 0.6:
                v = nb[rri(len(nb))]
                k2 = where_k[v]
                j = where_i[v]
            else:
                k2 = rri(K)
                rt2 = routes[k2]
                if not rt2:
                    stagnant += 1
                    continue
                j = rri(len(rt2))
                v = rt2[j]
                if v == t:
                    stagnant += 1
                    continue
            if k2 == s:
                cand = rs[:]
                cand[i], cand[j] = cand[j], cand[i]
                new_s = walk(s, cand)
                if new_s <= screen[s]:
                    accepted = accept1(s, cand, new_s)
            else:
                rt = routes[k2]
                Cs = CL[s]
                Ck = CL[k2]
                a = rs[i - 1] if i else 0
                b = rs[i + 1] if i + 1 < L else 0
                new_s = cost[s] - Cs[a][t] - Cs[t][b] + Cs[a][v] + Cs[v][b]
                x = rt[j - 1] if j else 0
                y = rt[j + 1] if j + 1 < len(rt) else 0
                new_k = cost[k2] - Ck[x][v] - Ck[v][y] + Ck[x][t] + Ck[t][y]
                if new_k <= screen[k2] and new_s <= screen[s]:
                    new_max = new_s if new_s > new_k else new_k
                    for kk in range(K):
                        if kk != s and kk != k2 and cost[kk] > new_max:
                            new_max = cost[kk]
                    new_tot = cur_tot - cost[s] - cost[k2] + new_s + new_k
                    if new_max < cur_max or (new_max == cur_max and new_tot < cur_tot):
                        rs[i] = v
                        rt[j] = t
                        accepted = confirm2(s, k2)
                        if not accepted:
                            rs[i] = t
                            rt[j] = v

        elif dice < 0.8:  # intra-route 2-opt
            if L >= 2:
                j = rri(L)
                if j != i:
                    lo, hi = (i, j) if i < j else (j, i)
                    cand = rs[:lo] + rs[lo : hi + 1][::-1] + rs[hi + 1 :]
                    new_s = walk(s, cand)
                    if new_s <= screen[s]:
                        accepted = accept1(s, cand, new_s)

        else:  # or-opt: move a short segment, direction preserved
            m = 2 if rnd() < 0.5 else 3
            if L >= m and i <= L - m:
                seg = rs[i : i + m]
                nb = nbr[t]
                guided = nb and rnd() < 0.6
                if guided:
                    v = nb[rri(len(nb))]
                    if v in seg:
                        stagnant += 1
                        continue
                    k2 = where_k[v]
                else:
                    k2 = rri(K)
                if k2 == s:
                    cand = rs[:i] + rs[i + m :]
                    if guided:
                        ju = where_i[v]
                        j = (ju - m if ju >= i + m else ju) + 1
                    else:
                        j = rri(len(cand) + 1)
                    if j != i:
                        cand[j:j] = seg
                        new_s = walk(s, cand)
                        if new_s <= screen[s]:
                            accepted = accept1(s, cand, new_s)
                elif not must_serve or L > m:
                    rt = routes[k2]
                    j = where_i[v] + 1 if guided else rri(len(rt) + 1)
                    Cs = CL[s]
                    Ck = CL[k2]
                    a = rs[i - 1] if i else 0
                    b = rs[i + m] if i + m < L else 0
                    last = seg[-1]
                    inner_s = 0.0
                    inner_k = 0.0
                    for q in range(m - 1):
                        inner_s += Cs[seg[q]][seg[q + 1]]
                        inner_k += Ck[seg[q]][seg[q + 1]]
                    new_s = cost[s] - Cs[a][t] - inner_s - Cs[last][b] + Cs[a][b]
                    x = rt[j - 1] if j else 0
                    y = rt[j] if j < len(rt) else 0
                    new_k = cost[k2] + Ck[x][t] + inner_k + Ck[last][y] - Ck[x][y]
                    if new_k <= screen[k2] and new_s <= screen[s]:
                        new_max = new_s if new_s > new_k else new_k
                        for kk in range(K):
                            if kk != s and kk != k2 and cost[kk] > new_max:
                                new_max = cost[kk]
                        new_tot = cur_tot - cost[s] - cost[k2] + new_s + new_k
                        if new_max < cur_max or (new_max == cur_max and new_tot < cur_tot):
                            del rs[i : i + m]
                            rt[j:j] = seg
                            accepted = confirm2(s, k2)
                            if not accepted:
                                del rt[j : j + m]
                                rs[i:i] = seg

        if not accepted:
            stagnant += 1

    return SolveResult(
        status="feasible",
        solution=Solution(tuple(tuple(r) for r in best_routes)),
        iterations=it,
        wall_time_s=time.perf_counter() - t0,
        trace=tuple(trace),
    )


def solve_homogeneous_baseline(
    problem: RoutingProblem,
    budget_s: float | None = None,
    *,
    budget_iters: int | None = None,
    seed: int = 0,
    early_stop_kicks: int | None = None,
) -> SolveResult:
    """Distance-only solve for comparison against the shaped costs.

    Every robot sees the raw path lengths (no velocity, no safety term) and
    capacities are lifted, since caps on combined cost have no meaning on a
    distance scale. Score the returned routes against the original problem
    with evaluate() to see what the distance plan actually costs the team.
    """
    dist = RoutingProblem.from_arrays(
        [np.asarray(m.distance, dtype=float) for m in problem.matrices],
        robot_ids=[m.robot.id for m in problem.matrices],
    )
    dist = replace(dist, allow_empty_routes=problem.allow_empty_routes)
    return solve_heuristic(
        dist,
        budget_s,
        budget_iters=budget_iters,
        seed=seed,
        early_stop_kicks=early_stop_kicks,
    )
