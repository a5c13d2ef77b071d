"""Task extraction: density clustering of task-labeled cells and placement of
a reachable inspection point next to each cluster.

Clustering is DBSCAN over cell centers. Determinism rules: seed points are
visited in (y, x) order, a border point in range of several clusters joins
the one that claims it first, and output clusters are sorted by their lowest
(y, x) member cell.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, UnreachableTaskError
from .gridmap import SemanticGrid


@dataclass(frozen=True)
class ClusterParams:
    epsilon: float
    min_points: int = 3
    min_cluster_size: int = 3
    separation: float = 0.3

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ConfigurationError("epsilon must be > 0")
        if self.min_points < 1:
            raise ConfigurationError("min_points must be >= 1")
        if self.min_cluster_size < 1:
            raise ConfigurationError("min_cluster_size must be >= 1")
        if self.separation < 0:
            raise ConfigurationError("separation must be >= 0")

    @classmethod
    def defaults(cls, resolution: float, **overrides) -> "ClusterParams":
        kw: dict = dict(epsilon=1.5 * resolution, min_points=3, min_cluster_size=3, separation=0.3)
        kw.update(overrides)
        return cls(**kw)


@dataclass(frozen=True)
class InspectionTask:
    id: int
    member_cells: tuple[tuple[int, int], ...]
    centroid: tuple[float, float]
    inspection_point: tuple[float, float]
    source_class: str


def cluster_task_cells(
    grid: SemanticGrid, class_name: str, params: ClusterParams
) -> list[list[tuple[int, int]]]:
    """DBSCAN over the cells labeled ``class_name``; clusters below
    min_cluster_size (and noise) are dropped. Returns clusters of (ix, iy)
    cells, members sorted by (iy, ix)."""
    code = grid.code_of(class_name)
    ys, xs = np.nonzero(grid.labels == code)
    n = len(ys)
    if n == 0:
        return []
    order = np.lexsort((xs, ys))
    pts = list(zip(ys[order].tolist(), xs[order].tolist()))
    index = {p: i for i, p in enumerate(pts)}

    # Neighborhood predicate in squared cell units: di² + dj² <= (eps/res)².
    rr = (params.epsilon / grid.resolution) ** 2
    reach = int(np.floor(params.epsilon / grid.resolution))
    offsets = [
        (dy, dx)
        for dy in range(-reach, reach + 1)
        for dx in range(-reach, reach + 1)
        if dy * dy + dx * dx <= rr
    ]

    neigh: list[list[int]] = []
    for iy, ix in pts:
        hits = []
        for dy, dx in offsets:
            j = index.get((iy + dy, ix + dx))
            if j is not None:
                hits.append(j)
        neigh.append(hits)
    is_core = [len(h) >= params.min_points for h in neigh]

    label = [-1] * n
    clusters: list[list[int]] = []
    for i in range(n):
        if label[i] != -1 or not is_core[i]:
            continue
        cid = len(clusters)
        label[i] = cid
        members = [i]
        queue = deque([i])
        while queue:
            j = queue.popleft()
            if not is_core[j]:
                continue  # border point: claimed, not expanded
            for k in neigh[j]:
                if label[k] == -1:
                    label[k] = cid
                    members.append(k)
                    queue.append(k)
        clusters.append(members)

    out = []
    for members in clusters:
        if len(members) < params.min_cluster_size:
            continue
        cells = sorted(pts[i] for i in members)
        out.append([(ix, iy) for iy, ix in cells])
    out.sort(key=lambda cluster: (cluster[0][1], cluster[0][0]))
    return out


def place_inspection_point(
    cluster: list[tuple[int, int]],
    grid: SemanticGrid,
    params: ClusterParams,
    task_id: int = 0,
    source_class: str = "",
) -> InspectionTask:
    """Nearest free-space cell center at least ``separation`` from the cluster
    centroid, searched within max(4·separation, 20·resolution). Ties break to
    the lowest (y, x) cell."""
    if not cluster:
        raise ConfigurationError("cannot place a point for an empty cluster")
    res = grid.resolution
    cells = np.asarray(cluster, dtype=np.int64)
    centers = (cells + 0.5) * res
    cx, cy = float(centers[:, 0].mean()), float(centers[:, 1].mean())
    radius = max(4.0 * params.separation, 20.0 * res)

    nx, ny = grid.shape
    ix_lo = max(int((cx - radius) / res) - 1, 0)
    ix_hi = min(int((cx + radius) / res) + 2, nx)
    iy_lo = max(int((cy - radius) / res) - 1, 0)
    iy_hi = min(int((cy + radius) / res) + 2, ny)

    window = grid.point_free_mask[iy_lo:iy_hi, ix_lo:ix_hi].copy()
    inside_window = (
        (cells[:, 0] >= ix_lo) & (cells[:, 0] < ix_hi) & (cells[:, 1] >= iy_lo) & (cells[:, 1] < iy_hi)
    )
    window[cells[inside_window, 1] - iy_lo, cells[inside_window, 0] - ix_lo] = False

    wy, wx = np.nonzero(window)
    gx = wx + ix_lo
    gy = wy + iy_lo
    d = np.hypot((gx + 0.5) * res - cx, (gy + 0.5) * res - cy)
    ok = (d >= params.separation) & (d <= radius)
    if not ok.any():
        raise UnreachableTaskError(
            f"no free inspection point within {radius:.3g} m of cluster centroid "
            f"({cx:.3g}, {cy:.3g}) for task {task_id}",
            task_ids=[task_id],
        )
    gx, gy, d = gx[ok], gy[ok], d[ok]
    best = np.lexsort((gx, gy, d))[0]
    point = ((gx[best] + 0.5) * res, (gy[best] + 0.5) * res)
    return InspectionTask(
        id=task_id,
        member_cells=tuple((int(x), int(y)) for x, y in cells),
        centroid=(cx, cy),
        inspection_point=(float(point[0]), float(point[1])),
        source_class=source_class,
    )


def extract_tasks(
    grid: SemanticGrid, params: ClusterParams, classes: tuple[str, ...] | None = None
) -> list[InspectionTask]:
    """All inspection tasks on the grid, ids 1-based, ordered by task class
    (configuration order) then cluster position."""
    names = classes if classes is not None else grid.config.task_classes
    tasks: list[InspectionTask] = []
    tid = 1
    for cname in names:
        for cluster in cluster_task_cells(grid, cname, params):
            tasks.append(place_inspection_point(cluster, grid, params, task_id=tid, source_class=cname))
            tid += 1
    return tasks
