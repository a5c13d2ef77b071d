"""Seeded RRT* in continuous 2D space against a caller-supplied visibility
predicate. Used to bridge disconnected roadmap components; paths are
post-smoothed by greedy shortcutting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

Point = tuple[float, float]


@dataclass(frozen=True)
class RRTParams:
    step: float | None = None  # None: resolved to 2x grid resolution by the caller
    goal_bias: float = 0.1
    rewire_factor: float = 4.0  # rewiring radius = factor * step
    max_iters: int = 20000
    refine_iters: int = 500  # extra growth after the goal is first reached

    def __post_init__(self):
        if self.step is not None and self.step <= 0:
            raise ConfigurationError("step must be > 0")
        if not 0.0 <= self.goal_bias < 1.0:
            raise ConfigurationError("goal_bias must lie in [0, 1)")
        if self.rewire_factor <= 0 or self.max_iters < 1 or self.refine_iters < 0:
            raise ConfigurationError("bad RRT parameters")


def shortcut(points: list[Point], los) -> list[Point]:
    """Greedy smoothing: from each kept vertex, jump to the farthest vertex
    still in line of sight."""
    out = [points[0]]
    i = 0
    last = len(points) - 1
    while i < last:
        j = last
        while j > i + 1 and not los(points[i], points[j]):
            j -= 1
        out.append(points[j])
        i = j
    return out


def plan_path(
    extent: tuple[float, float],
    los,
    start: Point,
    goal: Point,
    params: RRTParams,
    rng: np.random.Generator,
    box: tuple[Point, Point] | None = None,
    guide: list[Point] | None = None,
) -> list[Point] | None:
    """Collision-free polyline start..goal, or None if the iteration budget
    runs out. ``los(a, b)`` decides segment validity; ``extent`` bounds the
    sampling region, ``box`` (lo, hi corners) narrows it further. ``guide``
    waypoints, when given, attract half the samples (gaussian around a random
    waypoint) so the tree follows a known corridor instead of diffusing.
    Deterministic for a given rng state."""
    if params.step is None:
        raise ConfigurationError("step must be resolved before planning")
    if los(start, goal):
        return [start, goal]

    step = params.step
    rewire_sq = (params.rewire_factor * step) ** 2
    cap = params.max_iters + 1
    pts = np.empty((cap, 2))
    parent = np.full(cap, -1, dtype=np.int32)
    cost = np.zeros(cap)
    pts[0] = start
    n = 1
    goal_arr = np.asarray(goal, dtype=float)
    if box is None:
        lo = np.zeros(2)
        hi = np.asarray(extent, dtype=float)
    else:
        lo = np.clip(np.asarray(box[0], dtype=float), 0.0, extent)
        hi = np.clip(np.asarray(box[1], dtype=float), 0.0, extent)

    gpts = np.asarray(guide, dtype=float) if guide else None

    best_goal_cost = np.inf
    best_goal_node = -1
    found_at = -1

    for it in range(params.max_iters):
        if found_at >= 0 and it - found_at >= params.refine_iters:
            break
        r = rng.random()
        if r < params.goal_bias:
            sample = goal_arr
        elif gpts is not None and r < params.goal_bias + 0.5:
            w = gpts[rng.integers(len(gpts))]
            sample = np.clip(w + rng.normal(0.0, 2.0 * step, 2), lo, hi)
        else:
            sample = rng.uniform(lo, hi)

        d2 = ((pts[:n] - sample) ** 2).sum(axis=1)
        nearest = int(np.argmin(d2))
        dist = float(np.sqrt(d2[nearest]))
        if dist < 1e-12:
            continue
        # connect-style extension: walk toward the sample in step increments
        # for as long as each increment stays visible from the previous one;
        # a single step per sample crawls hopelessly in corridor mazes, and
        # piecewise checks keep the sampling density contract of los() while
        # avoiding a quadratic re-scan of the whole ray
        base = pts[nearest].copy()
        prev_t = (float(base[0]), float(base[1]))
        unit = (sample - base) / dist
        new = None
        for k in range(1, 33):
            reach = k * step
            cand = sample.astype(float) if reach >= dist else base + unit * reach
            cand_t = (float(cand[0]), float(cand[1]))
            if not los(prev_t, cand_t):
                break
            new = cand
            prev_t = cand_t
            if reach >= dist:
                break
        if new is None:
            continue
        new_t = prev_t

        nd2 = ((pts[:n] - new) ** 2).sum(axis=1)
        nd = np.sqrt(nd2)
        near = np.nonzero(nd2 <= rewire_sq)[0]
        # parent choice: cheapest reachable candidate first
        order = near[np.argsort(cost[near] + nd[near], kind="stable")]
        best_p = nearest
        best_c = cost[nearest] + nd[nearest]
        for i in order:
            c = cost[i] + nd[i]
            if c >= best_c:
                break
            if los(tuple(pts[i]), new_t):
                best_p, best_c = int(i), c
                break
        pts[n] = new
        parent[n] = best_p
        cost[n] = best_c

        for i in near:
            c = best_c + nd[i]
            if c + 1e-12 < cost[i] and los(new_t, tuple(pts[i])):
                parent[i] = n
                cost[i] = c

        gd = float(np.hypot(new[0] - goal_arr[0], new[1] - goal_arr[1]))
        if gd <= step and los(new_t, goal):
            if best_c + gd < best_goal_cost:
                best_goal_cost = best_c + gd
                best_goal_node = n
            if found_at < 0:
                found_at = it
        n += 1

    if best_goal_node < 0:
        return None
    chain = [goal]
    k = best_goal_node
    while k >= 0:
        chain.append((float(pts[k][0]), float(pts[k][1])))
        k = int(parent[k])
    chain.reverse()
    chain[0] = start  # exact endpoint identity for stitching
    return shortcut(chain, los)
