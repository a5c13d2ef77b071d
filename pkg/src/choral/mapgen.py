"""Seeded procedural benchmark maps: four named templates of increasing size."""

from dataclasses import dataclass, replace
import math

import numpy as np
from scipy import ndimage

from .errors import ConfigurationError, MapGenerationError
from .gridmap import FREE_CODE, OBSTACLE_CODE, ClassConfig, EnvironmentClass, SemanticGrid
from .taskextract import ClusterParams

_TASK_CLASS = "marker"
_TASK_CODE = 2  # label_names order: free, obstacle, marker, terrain
_TERRAIN_CODE = 3

# template -> (width m, height m, resolution m, task count, terrain class,
#              obstacle density, terrain density)
_TEMPLATES: dict[str, tuple[float, float, float, int, str, float, float]] = {
    "orchard": (24.0, 12.0, 0.1, 110, "mud", 0.88, 1.0),
    "forest": (32.5, 17.5, 0.1, 58, "undergrowth", 0.10, 0.08),
    "park": (44.5, 34.0, 0.25, 94, "mud", 0.05, 0.10),
    "cave": (280.0, 180.0, 0.5, 266, "rubble", 0.2, 0.06),
}


@dataclass(frozen=True)
class MapSpec:
    """Recipe for one synthetic map; unset fields fall back to the template.

    The density knobs are template-specific dials in [0, 1]: tree presence
    probability (orchard), obstacle area fraction (forest), structure density
    (park), extra-loop rate (cave); terrain_density scales the impeding
    terrain coverage the same way.
    """

    template: str
    size_m: tuple[float, float] | None = None
    resolution: float | None = None
    task_count: int | None = None
    obstacle_density: float | None = None
    terrain_density: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.template not in _TEMPLATES:
            raise ConfigurationError(
                f"unknown template {self.template!r}; choose one of {sorted(_TEMPLATES)}"
            )
        if self.size_m is not None and (self.size_m[0] <= 0 or self.size_m[1] <= 0):
            raise ConfigurationError("map size must be > 0")
        if self.resolution is not None and self.resolution <= 0:
            raise ConfigurationError("resolution must be > 0")
        if self.task_count is not None and self.task_count < 1:
            raise ConfigurationError("task count must be >= 1")
        for name in ("obstacle_density", "terrain_density"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1]")

    def resolve(self) -> "MapSpec":
        """Fill every None field from the template defaults."""
        w, h, res, tasks, _, obst, terr = _TEMPLATES[self.template]
        return replace(
            self,
            size_m=self.size_m or (w, h),
            resolution=self.resolution or res,
            task_count=self.task_count if self.task_count is not None else tasks,
            obstacle_density=self.obstacle_density if self.obstacle_density is not None else obst,
            terrain_density=self.terrain_density if self.terrain_density is not None else terr,
        )

    def to_dict(self) -> dict:
        return {
            "template": self.template,
            "size_m": list(self.size_m) if self.size_m else None,
            "resolution": self.resolution,
            "task_count": self.task_count,
            "obstacle_density": self.obstacle_density,
            "terrain_density": self.terrain_density,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MapSpec":
        d = dict(d)
        if d.get("size_m") is not None:
            d["size_m"] = tuple(d["size_m"])
        return cls(**d)


@dataclass(frozen=True)
class GeneratedMap:
    """A labeled grid plus the placements the generator committed to.

    All task cells and the depot sit in one 8-connected free-space component
    by construction, each with a clear free disc around it so a nearby
    inspection point always exists.
    """

    grid: SemanticGrid
    task_cells: tuple[tuple[int, int], ...]
    depot: tuple[float, float]
    spec: MapSpec


def class_config_for(template: str) -> ClassConfig:
    """The semantic classes every map of this template is labeled with."""
    if template not in _TEMPLATES:
        raise ConfigurationError(f"unknown template {template!r}")
    terrain = _TEMPLATES[template][4]
    return ClassConfig(
        task_classes=(_TASK_CLASS,),
        environment_classes=(EnvironmentClass(terrain, impedes_traversal=True),),
    )


def cluster_params_for(resolution: float) -> ClusterParams:
    """Clustering parameters under which each generated marker cell becomes
    exactly one task: singleton clusters kept, inspection point one cell out."""
    return ClusterParams(
        epsilon=1.5 * resolution, min_points=1, min_cluster_size=1, separation=resolution
    )


def _grid_shape(spec: MapSpec) -> tuple[int, int]:
    w, h = spec.size_m
    nx = round(w / spec.resolution)
    ny = round(h / spec.resolution)
    if abs(nx * spec.resolution - w) > 1e-9 or abs(ny * spec.resolution - h) > 1e-9:
        raise ConfigurationError(
            f"size {w}x{h} m is not a whole number of {spec.resolution} m cells"
        )
    return nx, ny


def _disc(labels, cx, cy, r, res, code, only_free=False):
    ny, nx = labels.shape
    ix_lo = max(int((cx - r) / res), 0)
    ix_hi = min(int((cx + r) / res) + 2, nx)
    iy_lo = max(int((cy - r) / res), 0)
    iy_hi = min(int((cy + r) / res) + 2, ny)
    if ix_lo >= ix_hi or iy_lo >= iy_hi:
        return
    xs = (np.arange(ix_lo, ix_hi) + 0.5) * res - cx
    ys = (np.arange(iy_lo, iy_hi) + 0.5) * res - cy
    hit = ys[:, None] ** 2 + xs[None, :] ** 2 <= r * r
    window = labels[iy_lo:iy_hi, ix_lo:ix_hi]
    if only_free:
        hit &= window == FREE_CODE
    window[hit] = code


def _band(labels, axis_coords, lo, hi, code, only_free=True):
    sel = (axis_coords >= lo) & (axis_coords < hi)
    if only_free:
        sel &= labels == FREE_CODE
    labels[sel] = code


def _paint_orchard(labels, spec: MapSpec, rng) -> None:
    w, h = spec.size_m
    res = spec.resolution
    ny, nx = labels.shape
    yy = (np.arange(ny)[:, None] + 0.5) * res * np.ones((1, nx))
    row_pitch = 3.0
    trunk_pitch = 1.2
    rows = np.arange(2.0, h - 0.8, row_pitch)
    strip = 0.55 * spec.terrain_density
    for y0 in rows:
        for x0 in np.arange(trunk_pitch, w - trunk_pitch / 2, trunk_pitch):
            if rng.random() < spec.obstacle_density:
                _disc(labels, x0, y0, 0.25, res, OBSTACLE_CODE)
        if strip > 0:
            _band(labels, yy, y0 - 0.3 - strip, y0 - 0.3, _TERRAIN_CODE)
            _band(labels, yy, y0 + 0.3, y0 + 0.3 + strip, _TERRAIN_CODE)


def _paint_forest(labels, spec: MapSpec, rng) -> None:
    w, h = spec.size_m
    res = spec.resolution
    total = labels.size
    target = spec.obstacle_density * total
    for _ in range(4000):
        if np.count_nonzero(labels == OBSTACLE_CODE) >= target:
            break
        cx, cy = rng.uniform(0.8, w - 0.8), rng.uniform(0.8, h - 0.8)
        _disc(labels, cx, cy, rng.uniform(0.25, 0.6), res, OBSTACLE_CODE)
    target = spec.terrain_density * total
    for _ in range(2000):
        if np.count_nonzero(labels == _TERRAIN_CODE) >= target:
            break
        cx, cy = rng.uniform(0.0, w), rng.uniform(0.0, h)
        _disc(labels, cx, cy, rng.uniform(0.8, 2.0), res, _TERRAIN_CODE, only_free=True)


def _paint_park(labels, spec: MapSpec, rng) -> None:
    w, h = spec.size_m
    res = spec.resolution
    n_struct = max(1, round(spec.obstacle_density * 120))
    for _ in range(n_struct):
        sw, sh = rng.uniform(2.0, 6.0), rng.uniform(2.0, 6.0)
        x0 = rng.uniform(1.5, w - 1.5 - sw)
        y0 = rng.uniform(1.5, h - 1.5 - sh)
        labels[
            int(y0 / res) : int((y0 + sh) / res) + 1,
            int(x0 / res) : int((x0 + sw) / res) + 1,
        ] = OBSTACLE_CODE
    for _ in range(2):
        _disc(labels, rng.uniform(4, w - 4), rng.uniform(4, h - 4), rng.uniform(1.0, 2.0), res, OBSTACLE_CODE)
    total = labels.size
    target = spec.terrain_density * total
    for _ in range(2000):
        if np.count_nonzero(labels == _TERRAIN_CODE) >= target:
            break
        cx, cy = rng.uniform(0.0, w), rng.uniform(0.0, h)
        rx, ry = rng.uniform(1.5, 4.0), rng.uniform(1.5, 4.0)
        ix_lo = max(int((cx - rx) / res), 0)
        ix_hi = min(int((cx + rx) / res) + 2, labels.shape[1])
        iy_lo = max(int((cy - ry) / res), 0)
        iy_hi = min(int((cy + ry) / res) + 2, labels.shape[0])
        xs = ((np.arange(ix_lo, ix_hi) + 0.5) * res - cx) / rx
        ys = ((np.arange(iy_lo, iy_hi) + 0.5) * res - cy) / ry
        hit = ys[:, None] ** 2 + xs[None, :] ** 2 <= 1.0
        window = labels[iy_lo:iy_hi, ix_lo:ix_hi]
        window[hit & (window == FREE_CODE)] = _TERRAIN_CODE


def _paint_cave(labels, spec: MapSpec, rng) -> None:
    """Corridor maze: spanning tree over a coarse lattice plus random loops."""
    w, h = spec.size_m
    res = spec.resolution
    labels[:, :] = OBSTACLE_CODE
    pitch, margin, half = 8.0, 2.0, 1.5
    mx = max(int((w - 2 * margin) / pitch), 2)
    my = max(int((h - 2 * margin) / pitch), 2)

    def center(i, j):
        return margin + pitch / 2 + i * pitch, margin + pitch / 2 + j * pitch

    def carve(a, b):
        (x0, y0), (x1, y1) = center(*a), center(*b)
        lo_x, hi_x = min(x0, x1) - half, max(x0, x1) + half
        lo_y, hi_y = min(y0, y1) - half, max(y0, y1) + half
        labels[
            max(int(lo_y / res), 0) : int(hi_y / res) + 1,
            max(int(lo_x / res), 0) : int(hi_x / res) + 1,
        ] = FREE_CODE

    visited = np.zeros((mx, my), dtype=bool)
    stack = [(0, 0)]
    visited[0, 0] = True
    while stack:
        i, j = stack[-1]
        options = [
            (i + di, j + dj)
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1))
            if 0 <= i + di < mx and 0 <= j + dj < my and not visited[i + di, j + dj]
        ]
        if not options:
            stack.pop()
            continue
        nxt = options[rng.integers(len(options))]
        visited[nxt] = True
        carve((i, j), nxt)
        stack.append(nxt)
    for i in range(mx):  # extra loops so the maze is not a tree
        for j in range(my):
            if i + 1 < mx and rng.random() < spec.obstacle_density:
                carve((i, j), (i + 1, j))
            if j + 1 < my and rng.random() < spec.obstacle_density:
                carve((i, j), (i, j + 1))

    total = labels.size
    target = spec.terrain_density * total
    for _ in range(4000):
        if np.count_nonzero(labels == _TERRAIN_CODE) >= target:
            break
        cx, cy = rng.uniform(0.0, w), rng.uniform(0.0, h)
        _disc(labels, cx, cy, rng.uniform(0.75, 2.0), res, _TERRAIN_CODE, only_free=True)


_PAINTERS = {
    "orchard": _paint_orchard,
    "forest": _paint_forest,
    "park": _paint_park,
    "cave": _paint_cave,
}


def generate_map(spec: MapSpec) -> GeneratedMap:
    """Deterministic synthetic map with exactly spec.task_count task cells.

    Painting happens first (template obstacles, then impeding terrain); task
    cells and the suggested depot are then sampled inside the largest free
    component, each with a fully free Chebyshev disc around it and spaced so
    single-cell clustering recovers every marker as its own task.
    """
    spec = spec.resolve()
    nx, ny = _grid_shape(spec)
    rng = np.random.default_rng(spec.seed)
    labels = np.full((ny, nx), FREE_CODE, dtype=np.int16)
    _PAINTERS[spec.template](labels, spec, rng)

    res = spec.resolution
    free = labels == FREE_CODE
    if not free.any():
        raise MapGenerationError(f"{spec.template} map has no free space at all")
    # routing connectivity ignores impeding terrain, so the component that
    # matters is over everything except obstacles
    comp, _ = ndimage.label(labels != OBSTACLE_CODE, structure=np.ones((3, 3), dtype=bool))
    largest = int(np.bincount(comp.ravel())[1:].argmax()) + 1

    # a 2-cell free disc guarantees cluster_params_for finds an inspection
    # point; 4-cell marker spacing keeps singleton clusters from merging
    clear_r = 2
    sep = 3
    clear = ndimage.minimum_filter(free, size=2 * clear_r + 1, mode="constant", cval=False)
    clear &= comp == largest
    cand_y, cand_x = np.nonzero(clear)
    if len(cand_y) == 0:
        raise MapGenerationError(
            f"{spec.template} map (seed {spec.seed}) has no cell with a clear "
            f"{clear_r}-cell free disc; lower the densities"
        )

    blocked = np.zeros_like(clear)

    def take(iy, ix):
        blocked[max(iy - sep, 0) : iy + sep + 1, max(ix - sep, 0) : ix + sep + 1] = True

    mid = ((cand_x - (nx - 1) / 2) ** 2 + (cand_y - (ny - 1) / 2) ** 2)
    d0 = int(np.lexsort((cand_x, cand_y, mid))[0])
    depot_cell = (int(cand_x[d0]), int(cand_y[d0]))
    take(cand_y[d0], cand_x[d0])

    cells: list[tuple[int, int]] = []

    def sweep(indices):
        for idx in indices:
            iy, ix = int(cand_y[idx]), int(cand_x[idx])
            if blocked[iy, ix]:
                continue
            cells.append((ix, iy))
            take(iy, ix)
            if len(cells) == spec.task_count:
                return True
        return False

    # random pass for spread, then a raster pass to pack the remainder
    if not sweep(rng.permutation(len(cand_y))):
        sweep(range(len(cand_y)))
    if len(cells) < spec.task_count:
        raise MapGenerationError(
            f"could only place {len(cells)} of {spec.task_count} tasks on the "
            f"{spec.template} map (seed {spec.seed}); lower the densities or the count"
        )
    for ix, iy in cells:
        labels[iy, ix] = _TASK_CODE

    labels.setflags(write=False)
    grid = SemanticGrid(resolution=res, labels=labels, config=class_config_for(spec.template))
    depot = grid.cell_center(depot_cell)
    return GeneratedMap(grid=grid, task_cells=tuple(cells), depot=depot, spec=spec)
