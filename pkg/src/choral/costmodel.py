"""Per-robot edge costs: traversal time plus a survival-model safety term.

A robot accumulates accident exposure along a path as a line integral of a
per-meter rate: a terrain component looked up by cell label and a collision
component that decays logistically with obstacle clearance. The accident
probability of a path is 1 - exp(-exposure); the routed cost of an edge is
time + alpha * probability. Return-to-depot columns are zeroed so routes are
open.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import ConfigurationError, OutOfBoundsError
from .gridmap import SemanticGrid
from .roadmap import PathTable

Point = tuple[float, float]


@dataclass(frozen=True)
class RobotProfile:
    id: str
    nominal_velocity: float
    lambda_trav: dict[str, float] = field(default_factory=dict)
    beta: float = 10.0
    d_half: float = 0.5
    alpha: float = 50.0
    capacity: float | None = None
    weight_trav: float = 1.0
    weight_coll: float = 1.0

    def __post_init__(self):
        if self.nominal_velocity <= 0:
            raise ConfigurationError(f"robot {self.id}: velocity must be > 0")
        if any(v < 0 for v in self.lambda_trav.values()):
            raise ConfigurationError(f"robot {self.id}: negative terrain rate")
        if self.beta <= 0 or self.d_half <= 0:
            raise ConfigurationError(f"robot {self.id}: beta and d_half must be > 0")
        if self.alpha < 0:
            raise ConfigurationError(f"robot {self.id}: alpha must be >= 0")
        if self.capacity is not None and self.capacity <= 0:
            raise ConfigurationError(f"robot {self.id}: capacity must be > 0")
        if self.weight_trav < 0 or self.weight_coll < 0:
            raise ConfigurationError(f"robot {self.id}: rate weights must be >= 0")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "nominal_velocity": self.nominal_velocity,
            "lambda_trav": dict(self.lambda_trav),
            "beta": self.beta,
            "d_half": self.d_half,
            "alpha": self.alpha,
            "capacity": self.capacity,
            "weight_trav": self.weight_trav,
            "weight_coll": self.weight_coll,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RobotProfile":
        return cls(**d)


def collision_rate(robot: RobotProfile, clearance) -> np.ndarray | float:
    """Per-meter collision rate, logistic in clearance: 0.5 at d_half,
    approaching 1 against obstacles and 0 in open space."""
    return expit(-robot.beta * (np.asarray(clearance, dtype=float) - robot.d_half))


def accident_rate(robot: RobotProfile, label: str | None, clearance: float) -> float:
    """Combined per-meter accident rate for one cell; labels missing from the
    robot's terrain map contribute nothing."""
    trav = robot.lambda_trav.get(label, 0.0) if label is not None else 0.0
    return robot.weight_trav * trav + robot.weight_coll * float(collision_rate(robot, clearance))


def time_cost(length: float, robot: RobotProfile) -> float:
    if length < 0:
        raise ConfigurationError("negative path length")
    return length / robot.nominal_velocity


def _rate_by_code(robot: RobotProfile, grid: SemanticGrid) -> np.ndarray:
    names = grid.config.label_names()
    return np.array([robot.lambda_trav.get(name, 0.0) for name in names])


def _crossings(a: float, b: float, resolution: float) -> np.ndarray:
    """Parameters t in (0,1) where a + t*(b-a) crosses a multiple of
    resolution."""
    if a == b:
        return np.empty(0)
    lo, hi = (a, b) if a < b else (b, a)
    k0 = int(np.ceil(lo / resolution))
    k1 = int(np.floor(hi / resolution))
    if k1 < k0:
        return np.empty(0)
    ks = np.arange(k0, k1 + 1, dtype=float) * resolution
    t = (ks - a) / (b - a)
    return t[(t > 0.0) & (t < 1.0)]


def _segment_samples(path: list[Point], spacing: float, resolution: float):
    """Midpoints and lengths of subsegments covering the polyline.

    Breakpoints sit on every cell-boundary crossing, so each subsegment lies
    in a single cell and the midpoint-rate times length rule integrates the
    per-cell rate field exactly. Pieces longer than ``spacing`` are split
    further (rate constant within a cell, so exactness is unaffected).
    """
    mids = []
    steps = []
    for (ax, ay), (bx, by) in zip(path, path[1:]):
        seg = float(np.hypot(bx - ax, by - ay))
        if seg == 0.0:
            continue
        ts = np.unique(
            np.concatenate(
                (
                    np.array([0.0, 1.0]),
                    _crossings(ax, bx, resolution),
                    _crossings(ay, by, resolution),
                )
            )
        )
        lens = np.diff(ts) * seg
        reps = np.maximum(np.ceil(lens / spacing).astype(np.int64), 1)
        total = int(reps.sum())
        idx = np.repeat(np.arange(len(lens)), reps)
        local = (np.arange(total) - np.repeat(np.cumsum(reps) - reps, reps) + 0.5) / reps[idx]
        mid_t = ts[:-1][idx] + local * np.diff(ts)[idx]
        mids.append(np.column_stack((ax + mid_t * (bx - ax), ay + mid_t * (by - ay))))
        steps.append(lens[idx] / reps[idx])
    if not mids:
        return np.empty((0, 2)), np.empty(0)
    return np.vstack(mids), np.concatenate(steps)


def _cells_of(grid: SemanticGrid, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    nx, ny = grid.shape
    w, h = grid.extent
    if len(pts) and (
        pts[:, 0].min() < 0 or pts[:, 0].max() > w or pts[:, 1].min() < 0 or pts[:, 1].max() > h
    ):
        raise OutOfBoundsError("path sample outside the grid")
    inv = 1.0 / grid.resolution
    ix = np.minimum((pts[:, 0] * inv).astype(np.int64), nx - 1)
    iy = np.minimum((pts[:, 1] * inv).astype(np.int64), ny - 1)
    return ix, iy


def exposure(
    path: list[Point], robot: RobotProfile, grid: SemanticGrid, spacing: float | None = None
) -> tuple[float, float]:
    """(terrain, collision) accident exposure integrals along the path,
    sampled at ``spacing`` (default: one grid resolution)."""
    if grid.edf is None:
        raise ConfigurationError("grid has no clearance field; run compute_edf first")
    mids, ds = _segment_samples(path, spacing or grid.resolution, grid.resolution)
    if len(ds) == 0:
        return 0.0, 0.0
    ix, iy = _cells_of(grid, mids)
    rates = _rate_by_code(robot, grid)[grid.labels[iy, ix]]
    trav = float(np.dot(rates, ds)) * robot.weight_trav
    coll = float(np.dot(collision_rate(robot, grid.edf[iy, ix]), ds)) * robot.weight_coll
    return trav, coll


def safety_cost(
    path: list[Point], robot: RobotProfile, grid: SemanticGrid, spacing: float | None = None
) -> float:
    """Accident probability along the path, in [0, 1)."""
    trav, coll = exposure(path, robot, grid, spacing)
    return float(-np.expm1(-(trav + coll)))


@dataclass(frozen=True)
class EdgeCost:
    time_s: float
    safety_prob: float
    alpha: float

    @property
    def combined(self) -> float:
        return self.time_s + self.alpha * self.safety_prob


def edge_cost(path: list[Point], robot: RobotProfile, grid: SemanticGrid) -> EdgeCost:
    length = float(
        sum(np.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(path, path[1:]))
    )
    return EdgeCost(
        time_s=time_cost(length, robot),
        safety_prob=safety_cost(path, robot, grid),
        alpha=robot.alpha,
    )


@dataclass
class CostMatrix:
    """Routing costs for one robot over nodes 0..n-1, node 0 its depot.

    ``combined = time_s + alpha * safety_prob`` entrywise, except the return
    column (j = 0), which is zero in every component. ``trav_exp``/``coll_exp``
    hold the additive exposure integrals behind ``safety_prob`` so route-level
    probabilities can be recovered exactly.
    """

    robot: RobotProfile
    combined: np.ndarray
    time_s: np.ndarray
    safety_prob: np.ndarray
    trav_exp: np.ndarray
    coll_exp: np.ndarray
    distance: np.ndarray
    task_ids: list[int | None]

    @property
    def n(self) -> int:
        return self.combined.shape[0]

    def to_dict(self) -> dict:
        return {
            "robot": self.robot.id,
            "combined": self.combined.tolist(),
            "time_s": self.time_s.tolist(),
            "safety_prob": self.safety_prob.tolist(),
            "trav_exp": self.trav_exp.tolist(),
            "coll_exp": self.coll_exp.tolist(),
            "distance": self.distance.tolist(),
            "task_ids": list(self.task_ids),
        }

    @classmethod
    def from_dict(cls, d: dict, robot: RobotProfile) -> "CostMatrix":
        arrays = {}
        for key in ("combined", "time_s", "safety_prob", "trav_exp", "coll_exp", "distance"):
            m = np.asarray(d[key], dtype=float)
            m.setflags(write=False)
            arrays[key] = m
        return cls(robot=robot, task_ids=list(d["task_ids"]), **arrays)


class _PathStructure:
    """Robot-independent geometry of a path table: midpoint samples of every
    roadmap edge (for exposure integrals) and, per source terminal, the
    ordered parent steps needed to accumulate per-pair sums along the
    shortest-path trees."""

    def __init__(self, table: PathTable):
        rm = table.roadmap
        grid = rm.grid
        edges = rm.edges()
        mids_all, ds_all, counts = [], [], []
        for u, v, _ in edges:
            mids, ds = _segment_samples(
                [rm.nodes[u].point, rm.nodes[v].point], grid.resolution, grid.resolution
            )
            mids_all.append(mids)
            ds_all.append(ds)
            counts.append(len(ds))
        if edges:
            mids = np.vstack(mids_all)
            self.ds = np.concatenate(ds_all)
            ix, iy = _cells_of(grid, mids)
            self.label_codes = grid.labels[iy, ix]
            self.clearances = grid.edf[iy, ix]
            self.bounds = np.concatenate(([0], np.cumsum(counts)))[:-1]
        else:
            self.ds = np.empty(0)
            self.label_codes = np.empty(0, dtype=np.int16)
            self.clearances = np.empty(0)
            self.bounds = np.empty(0, dtype=np.int64)

        edge_id = {(u, v): e for e, (u, v, _) in enumerate(edges)}
        T = table.n
        pred = table._pred
        self.n_terminals = T
        self.programs: list[list[tuple[int, int, int]]] = []
        for s in range(T):
            row = pred[s]
            seen = {s}
            prog: list[tuple[int, int, int]] = []
            for t in range(s + 1, T):  # pairs are symmetric; smaller source owns them
                chain = []
                v = t
                while v not in seen:
                    chain.append(v)
                    v = int(row[v])
                for node in reversed(chain):
                    p = int(row[node])
                    key = (p, node) if p < node else (node, p)
                    prog.append((node, p, edge_id[key]))
                    seen.add(node)
            self.programs.append(prog)
        self.n_nodes = len(rm.nodes)


def _structure(table: PathTable) -> _PathStructure:
    cached = getattr(table, "_exposure_structure", None)
    if cached is None:
        cached = _PathStructure(table)
        table._exposure_structure = cached
    return cached


def _pair_exposures(
    table: PathTable, robot: RobotProfile, grid: SemanticGrid
) -> tuple[np.ndarray, np.ndarray]:
    """Terrain and collision exposure between every terminal pair, summed
    edge-by-edge along the stored shortest paths. Symmetric."""
    st = _structure(table)
    rates = _rate_by_code(robot, grid)
    trav_d = rates[st.label_codes] * st.ds * robot.weight_trav
    coll_d = collision_rate(robot, st.clearances) * st.ds * robot.weight_coll
    if len(st.ds):
        trav_e = np.add.reduceat(trav_d, st.bounds)
        coll_e = np.add.reduceat(coll_d, st.bounds)
    else:
        trav_e = coll_e = np.empty(0)
    T = st.n_terminals
    trav = np.zeros((T, T))
    coll = np.zeros((T, T))
    tvals = np.zeros(st.n_nodes)
    cvals = np.zeros(st.n_nodes)
    for s in range(T):
        tvals[s] = 0.0
        cvals[s] = 0.0
        for node, p, eid in st.programs[s]:
            tvals[node] = tvals[p] + trav_e[eid]
            cvals[node] = cvals[p] + coll_e[eid]
        trav[s, s + 1 :] = tvals[s + 1 : T]
        coll[s, s + 1 :] = cvals[s + 1 : T]
    trav = trav + trav.T
    coll = coll + coll.T
    return trav, coll


def build_cost_matrices(
    table: PathTable, robots: list[RobotProfile], grid: SemanticGrid,
    depot_of_robot: list[int] | None = None,
) -> list[CostMatrix]:
    """One matrix per robot over [its depot] + all task nodes.

    With several depots, ``depot_of_robot[k]`` selects terminal index of
    robot k's depot; default is terminal 0 for everyone.
    """
    if not np.isfinite(table.lengths).all():
        raise ConfigurationError("path table incomplete")
    if grid.edf is None:
        raise ConfigurationError("grid has no clearance field; run compute_edf first")
    rm = table.roadmap
    nd = rm.n_depots
    task_idx = list(range(nd, table.n))
    depots = depot_of_robot or [0] * len(robots)
    if len(depots) != len(robots) or any(not 0 <= d < nd for d in depots):
        raise ConfigurationError("bad depot assignment")

    out = []
    for k, robot in enumerate(robots):
        sel = [depots[k]] + task_idx
        lengths = table.lengths[np.ix_(sel, sel)].copy()
        trav_all, coll_all = _pair_exposures(table, robot, grid)
        trav = trav_all[np.ix_(sel, sel)].copy()
        coll = coll_all[np.ix_(sel, sel)].copy()
        time_m = lengths / robot.nominal_velocity
        n = len(sel)
        for m in (lengths, trav, coll, time_m):
            m[:, 0] = 0.0
            np.fill_diagonal(m, 0.0)
        safety = -np.expm1(-(trav + coll))
        combined = time_m + robot.alpha * safety
        ids: list[int | None] = [None] + [rm.nodes[i].task_id for i in task_idx]
        for m in (combined, time_m, safety, trav, coll, lengths):
            m.setflags(write=False)
        out.append(
            CostMatrix(
                robot=robot,
                combined=combined,
                time_s=time_m,
                safety_prob=safety,
                trav_exp=trav,
                coll_exp=coll,
                distance=lengths,
                task_ids=ids,
            )
        )
    return out
