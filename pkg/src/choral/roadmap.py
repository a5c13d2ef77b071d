"""Roadmap construction over task inspection points and depots.

Straight edges connect every covisible terminal pair; leftover disconnected
components are bridged with seeded RRT*, whose smoothed waypoints enter the
graph as auxiliary nodes. All edges are straight segments, so edge length
equals chord length. The all-pairs table holds graph-shortest path lengths
between terminals (exactly symmetric) plus predecessors for lazy polyline
reconstruction.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from functools import partial

import numpy as np
from scipy import ndimage
from scipy.sparse import csr_matrix
from scipy.sparse import csgraph

from .errors import ConfigurationError, DisconnectedRoadmapError, OutOfBoundsError
from .gridmap import SemanticGrid
from .rrt import RRTParams, plan_path
from .taskextract import InspectionTask

Point = tuple[float, float]


def line_of_sight(grid: SemanticGrid, a: Point, b: Point) -> bool:
    """True iff every sample of segment a..b at spacing <= resolution/2 lies
    on a non-obstacle cell. Endpoints must be inside the grid."""
    ax, ay = float(a[0]), float(a[1])
    bx, by = float(b[0]), float(b[1])
    mask = grid.obstacle_mask
    ny, nx = mask.shape
    res = grid.resolution
    if not (0.0 <= ax <= nx * res and 0.0 <= bx <= nx * res
            and 0.0 <= ay <= ny * res and 0.0 <= by <= ny * res):
        grid.cell_of_point(a)
        grid.cell_of_point(b)
    # hot path for the RRT bridger: spacing length/n <= res/2 by construction,
    # and in-bounds endpoints keep every interpolated sample in bounds, so the
    # only clamp needed is the max edge
    n = int(math.hypot(bx - ax, by - ay) * 2.0 / res) + 1
    ts = np.arange(n + 1) * (1.0 / n)
    inv = 1.0 / res
    ix = np.minimum(((ax + ts * (bx - ax)) * inv).astype(np.int64), nx - 1)
    iy = np.minimum(((ay + ts * (by - ay)) * inv).astype(np.int64), ny - 1)
    return not mask.ravel().take(iy * nx + ix).any()


@dataclass(frozen=True)
class RoadmapNode:
    point: Point
    kind: str  # "depot" | "task" | "auxiliary"
    task_id: int | None = None


@dataclass
class Roadmap:
    """Nodes ordered depots, then tasks (id order), then auxiliaries."""

    grid: SemanticGrid
    nodes: list[RoadmapNode]
    adjacency: list[list[tuple[int, float]]]
    n_depots: int
    n_tasks: int
    seed: int
    _edges: list[tuple[int, int, float]] = field(default_factory=list)

    @property
    def n_terminals(self) -> int:
        return self.n_depots + self.n_tasks

    @property
    def n_auxiliary(self) -> int:
        return len(self.nodes) - self.n_terminals

    def node_point(self, i: int) -> Point:
        return self.nodes[i].point

    def edges(self) -> list[tuple[int, int, float]]:
        return list(self._edges)

    def add_edge(self, i: int, j: int, length: float) -> None:
        self.adjacency[i].append((j, length))
        self.adjacency[j].append((i, length))
        self._edges.append((min(i, j), max(i, j), length))

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "seed": self.seed,
            "n_depots": self.n_depots,
            "n_tasks": self.n_tasks,
            "nodes": [
                {"x": p.point[0], "y": p.point[1], "kind": p.kind, "task_id": p.task_id}
                for p in self.nodes
            ],
            "edges": [{"u": u, "v": v, "length": l} for u, v, l in sorted(self._edges)],
        }


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _raster_guide(
    grid: SemanticGrid, a: Point, b: Point, box: tuple[Point, Point] | None = None
) -> list[Point] | None:
    """Corridor waypoints from a raster wavefront between two points, or None
    when no raster path exists (within ``box`` if given). Doubles as a cheap
    existence oracle before any sampling is spent on a bridge."""
    trav = grid.traversable_mask
    nx_g, ny_g = grid.shape
    x_lo = y_lo = 0
    x_hi, y_hi = nx_g, ny_g
    if box is not None:
        (bx0, by0), (bx1, by1) = box
        inv = 1.0 / grid.resolution
        x_lo = max(int(bx0 * inv), 0)
        y_lo = max(int(by0 * inv), 0)
        x_hi = min(int(np.ceil(bx1 * inv)) + 1, nx_g)
        y_hi = min(int(np.ceil(by1 * inv)) + 1, ny_g)
    trav = trav[y_lo:y_hi, x_lo:x_hi]

    ax, ay = grid.cell_of_point(a)
    bx, by = grid.cell_of_point(b)
    ax -= x_lo; ay -= y_lo; bx -= x_lo; by -= y_lo
    H, W = trav.shape
    dist = np.full(trav.shape, -1, dtype=np.int32)
    dist[ay, ax] = 0
    # ring expansion confined to the frontier's bounding box; touching the
    # whole window every ring is quadratic-ish on long maze detours
    fr = np.ones((1, 1), dtype=bool)
    fy, fx = ay, ax
    d = 0
    while dist[by, bx] < 0:
        d += 1
        r0 = max(fy - 1, 0); c0 = max(fx - 1, 0)
        r1 = min(fy + fr.shape[0] + 1, H); c1 = min(fx + fr.shape[1] + 1, W)
        pad = np.zeros((r1 - r0, c1 - c0), dtype=bool)
        pad[fy - r0:fy - r0 + fr.shape[0], fx - c0:fx - c0 + fr.shape[1]] = fr
        grow = pad.copy()
        grow[1:] |= pad[:-1]
        grow[:-1] |= pad[1:]
        f = grow.copy()
        f[:, 1:] |= grow[:, :-1]
        f[:, :-1] |= grow[:, 1:]
        f &= trav[r0:r1, c0:c1]
        f &= dist[r0:r1, c0:c1] < 0
        if not f.any():
            return None
        dist[r0:r1, c0:c1][f] = d
        rows = f.any(axis=1).nonzero()[0]
        cols = f.any(axis=0).nonzero()[0]
        fr = f[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1]
        fy = r0 + int(rows[0]); fx = c0 + int(cols[0])

    cells = [(bx, by)]
    x, y = bx, by
    cur = int(dist[by, bx])
    while cur > 0:
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                yy, xx = y + dy, x + dx
                if 0 <= yy < H and 0 <= xx < W and dist[yy, xx] == cur - 1:
                    x, y, cur = xx, yy, cur - 1
                    break
            else:
                continue
            break
        cells.append((x, y))
    cells.reverse()
    pts = [grid.cell_center((cx + x_lo, cy + y_lo)) for cx, cy in cells[::3]]
    pts.append(grid.cell_center((cells[-1][0] + x_lo, cells[-1][1] + y_lo)))
    return pts


def _raster_reachability_check(grid: SemanticGrid, depots, tasks) -> None:
    """Cheap certificate of impossibility: terminals on different 8-connected
    traversable raster components can never be joined by any free polyline."""
    comp, _ = ndimage.label(grid.traversable_mask, structure=np.ones((3, 3), dtype=bool))
    dx, dy = grid.cell_of_point(depots[0])
    ref = comp[dy, dx]
    stranded = []
    for task in tasks:
        ix, iy = grid.cell_of_point(task.inspection_point)
        if comp[iy, ix] != ref:
            stranded.append(task.id)
    if stranded:
        raise DisconnectedRoadmapError(
            f"tasks {stranded} lie outside the depot's traversable region",
            task_ids=stranded,
        )
    for k, depot in enumerate(depots[1:], start=1):
        ix, iy = grid.cell_of_point(depot)
        if comp[iy, ix] != ref:
            raise DisconnectedRoadmapError(
                f"depot {k} is cut off from depot 0", task_ids=[]
            )


def build_prm(
    grid: SemanticGrid,
    tasks: list[InspectionTask],
    depots: list[Point],
    rrt_params: RRTParams | None = None,
    seed: int = 0,
) -> Roadmap:
    """Covisibility edges between all terminal pairs, then RRT* bridges until
    one component remains. Deterministic for fixed (grid, tasks, seed)."""
    if not depots:
        raise ConfigurationError("at least one depot required")
    for p in depots:
        ix, iy = grid.cell_of_point(p)
        if not grid.traversable_mask[iy, ix]:
            raise ConfigurationError(f"depot at {p} sits on an obstacle cell")
    for t in tasks:
        ix, iy = grid.cell_of_point(t.inspection_point)
        if not grid.traversable_mask[iy, ix]:
            raise ConfigurationError(f"inspection point of task {t.id} sits on an obstacle cell")
    _raster_reachability_check(grid, depots, tasks)

    params = rrt_params or RRTParams()
    if params.step is None:
        params = RRTParams(
            step=2.0 * grid.resolution,
            goal_bias=params.goal_bias,
            rewire_factor=params.rewire_factor,
            max_iters=params.max_iters,
            refine_iters=params.refine_iters,
        )

    nodes = [RoadmapNode(point=(float(p[0]), float(p[1])), kind="depot") for p in depots]
    nodes += [
        RoadmapNode(point=t.inspection_point, kind="task", task_id=t.id) for t in tasks
    ]
    rm = Roadmap(
        grid=grid,
        nodes=nodes,
        adjacency=[[] for _ in nodes],
        n_depots=len(depots),
        n_tasks=len(tasks),
        seed=seed,
    )
    uf = _UnionFind(len(nodes))

    pts = np.array([n.point for n in nodes])
    nT = len(nodes)
    los = partial(line_of_sight, grid)
    for i in range(nT):
        for j in range(i + 1, nT):
            if los(nodes[i].point, nodes[j].point):
                rm.add_edge(i, j, float(np.hypot(*(pts[i] - pts[j]))))
                uf.union(i, j)

    rng = np.random.default_rng(seed)
    extent = grid.extent
    while True:
        n_all = len(rm.nodes)
        roots = np.fromiter((uf.find(i) for i in range(n_all)), dtype=np.int64, count=n_all)
        if len(np.unique(roots)) <= 1:
            break
        all_pts = np.array([n.point for n in rm.nodes])
        # closest node pair across any two components
        d2 = ((all_pts[:, None, :] - all_pts[None, :, :]) ** 2).sum(axis=2)
        d2[roots[:, None] == roots[None, :]] = np.inf
        u, v = divmod(int(np.argmin(d2)), n_all)
        if u > v:
            u, v = v, u
        pu = np.asarray(rm.nodes[u].point)
        pv = np.asarray(rm.nodes[v].point)
        gap = float(np.hypot(*(pu - pv)))
        # sample in a window near the pair first, widening on failure; each
        # attempt is steered along a raster wavefront path, which also proves
        # a path exists before any sampling is spent (an 8 m gap through a
        # maze wall can hide a 100 m detour)
        poly = None
        for margin, budget in (
            (max(6.0 * params.step, 0.5 * gap), min(4000, params.max_iters)),
            (max(24.0 * params.step, 2.0 * gap), min(8000, params.max_iters)),
            (None, params.max_iters),
        ):
            window = None
            if margin is not None:
                window = (
                    tuple(np.minimum(pu, pv) - margin),
                    tuple(np.maximum(pu, pv) + margin),
                )
            guide = _raster_guide(grid, rm.nodes[u].point, rm.nodes[v].point, box=window)
            if guide is None:
                if window is None:
                    break  # no raster path at all: genuinely disconnected
                continue
            # shortcutting already smooths bridges; long post-goal refinement
            # buys nothing here
            attempt = replace(params, max_iters=budget,
                              refine_iters=min(120, params.refine_iters))
            poly = plan_path(extent, los, rm.nodes[u].point, rm.nodes[v].point,
                             attempt, rng, box=window, guide=guide)
            if poly is not None:
                break
        if poly is None:
            root0 = uf.find(0)
            bad = sorted(
                node.task_id
                for i, node in enumerate(rm.nodes)
                if node.task_id is not None and uf.find(i) != root0
            )
            raise DisconnectedRoadmapError(
                f"bridging failed between nodes {u} and {v} after {params.max_iters} samples; "
                f"tasks {bad} presumed unreachable",
                task_ids=bad,
            )
        prev = u
        for p in poly[1:-1]:
            rm.nodes.append(RoadmapNode(point=p, kind="auxiliary"))
            rm.adjacency.append([])
            uf.parent.append(len(uf.parent))
            k = len(rm.nodes) - 1
            rm.add_edge(prev, k, float(np.hypot(p[0] - rm.nodes[prev].point[0],
                                                p[1] - rm.nodes[prev].point[1])))
            uf.union(prev, k)
            prev = k
        rm.add_edge(prev, v, float(np.hypot(rm.nodes[v].point[0] - rm.nodes[prev].point[0],
                                            rm.nodes[v].point[1] - rm.nodes[prev].point[1])))
        uf.union(prev, v)
    return rm


@dataclass
class PathTable:
    """Shortest path lengths between terminals plus predecessor trees.

    ``lengths[i, j]`` is exactly symmetric; polylines are reconstructed on
    demand from the predecessor matrix (rows indexed by terminal)."""

    roadmap: Roadmap
    lengths: np.ndarray
    _pred: np.ndarray

    @property
    def n(self) -> int:
        return self.lengths.shape[0]

    def length(self, i: int, j: int) -> float:
        return float(self.lengths[i, j])

    def node_sequence(self, i: int, j: int) -> list[int]:
        """Roadmap node indices along the path from terminal i to terminal j."""
        if i == j:
            return [i]
        s, t = (i, j) if i < j else (j, i)
        seq = [t]
        k = t
        while k != s:
            k = int(self._pred[s, k])
            seq.append(k)
        if i < j:
            seq.reverse()
        return seq

    def polyline(self, i: int, j: int) -> list[Point]:
        return [self.roadmap.nodes[k].point for k in self.node_sequence(i, j)]

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "n": self.n,
            "lengths": [[float(v) for v in row] for row in self.lengths],
        }


def astar_path(roadmap: Roadmap, src: int, dst: int) -> tuple[float, list[int]]:
    """Shortest path between two roadmap nodes by A* with the straight-line
    heuristic (admissible: every edge is a chord). Returns (length, nodes)."""
    if src == dst:
        return 0.0, [src]
    pts = [n.point for n in roadmap.nodes]
    gx, gy = pts[dst]

    def h(i: int) -> float:
        return float(np.hypot(pts[i][0] - gx, pts[i][1] - gy))

    best = {src: 0.0}
    parent = {src: -1}
    heap = [(h(src), 0.0, src)]
    closed: set[int] = set()
    while heap:
        _, g, node = heapq.heappop(heap)
        if node == dst:
            seq = [dst]
            while parent[seq[-1]] != -1:
                seq.append(parent[seq[-1]])
            seq.reverse()
            return g, seq
        if node in closed:
            continue
        closed.add(node)
        for nb, w in roadmap.adjacency[node]:
            ng = g + w
            if nb not in best or ng < best[nb]:
                best[nb] = ng
                parent[nb] = node
                heapq.heappush(heap, (ng + h(nb), ng, nb))
    raise DisconnectedRoadmapError(
        f"no path between nodes {src} and {dst}",
        task_ids=[t for t in (roadmap.nodes[dst].task_id,) if t is not None],
    )


def all_pairs_paths(roadmap: Roadmap) -> PathTable:
    """Graph-shortest lengths between every terminal pair, canonicalized so
    that lengths[i, j] and lengths[j, i] are the same float."""
    n_all = len(roadmap.nodes)
    T = roadmap.n_terminals
    edges = roadmap.edges()
    if edges:
        u = np.array([e[0] for e in edges])
        v = np.array([e[1] for e in edges])
        w = np.array([e[2] for e in edges])
        graph = csr_matrix((w, (u, v)), shape=(n_all, n_all))
    else:
        graph = csr_matrix((n_all, n_all))
    dist, pred = csgraph.dijkstra(
        graph, directed=False, indices=np.arange(T), return_predecessors=True
    )
    block = dist[:, :T]
    if np.isinf(block).any():
        bad = sorted(
            {
                roadmap.nodes[j].task_id
                for i in range(T)
                for j in range(T)
                if np.isinf(block[i, j]) and roadmap.nodes[j].task_id is not None
            }
        )
        raise DisconnectedRoadmapError(
            f"path table incomplete; tasks {bad} unreachable", task_ids=bad
        )
    lengths = np.zeros((T, T))
    iu = np.triu_indices(T, k=1)
    lengths[iu] = block[iu]
    lengths = lengths + lengths.T
    return PathTable(roadmap=roadmap, lengths=lengths, _pred=pred.astype(np.int32))
