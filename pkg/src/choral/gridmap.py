"""Semantic 2D grid: voxel collapse, label assignment, and obstacle clearance field.

Label codes are small ints assigned per :class:`ClassConfig`: 0 = free,
1 = obstacle, then task classes and environment classes in configuration
order.  Cells are addressed as ``(ix, iy)`` with the cell center at
``((ix + 0.5) * resolution, (iy + 0.5) * resolution)``; numpy arrays are
indexed ``[iy, ix]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy import ndimage

from .errors import ConfigurationError, DegenerateInputError, OutOfBoundsError

FREE_CODE = 0
OBSTACLE_CODE = 1

OBSTACLE_NAME = "obstacle"


@dataclass(frozen=True)
class EnvironmentClass:
    name: str
    impedes_traversal: bool = False


@dataclass(frozen=True)
class ClassConfig:
    """User-defined semantic classes split into inspection tasks and terrain.

    ``semantic_classes`` fixes the order of categorical probability vectors:
    task classes, then environment classes, then the free class last.
    """

    task_classes: tuple[str, ...]
    environment_classes: tuple[EnvironmentClass, ...]
    free_class: str = "free"
    obstacle_height_threshold: float = 1.5

    def __post_init__(self):
        names = list(self.task_classes) + [e.name for e in self.environment_classes]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"duplicate class names in {names}")
        if self.free_class in names:
            raise ConfigurationError(f"free class {self.free_class!r} also listed as task/environment")
        if OBSTACLE_NAME in names or self.free_class == OBSTACLE_NAME:
            raise ConfigurationError(f"{OBSTACLE_NAME!r} is a reserved label")
        if self.obstacle_height_threshold <= 0:
            raise ConfigurationError("obstacle_height_threshold must be > 0")

    @property
    def semantic_classes(self) -> tuple[str, ...]:
        """Canonical class order for categorical/embedding assignment."""
        return (
            self.task_classes
            + tuple(e.name for e in self.environment_classes)
            + (self.free_class,)
        )

    @property
    def impeding_classes(self) -> frozenset[str]:
        return frozenset(e.name for e in self.environment_classes if e.impedes_traversal)

    def label_names(self) -> tuple[str, ...]:
        """Code -> name table for grids built from this configuration."""
        return (
            (self.free_class, OBSTACLE_NAME)
            + self.task_classes
            + tuple(e.name for e in self.environment_classes)
        )


@dataclass(frozen=True)
class VoxelStack:
    """Dense 3D stack of semantic voxels, ``[iz, iy, ix]`` indexed.

    ``vectors`` holds one row per voxel: categorical probabilities over
    ``ClassConfig.semantic_classes`` (mode ``"categorical"``) or raw feature
    embeddings (mode ``"embedding"``).  Only occupied voxels are labeled.
    """

    resolution: float
    occupancy: np.ndarray
    vectors: np.ndarray
    mode: str = "categorical"

    def __post_init__(self):
        if self.occupancy.ndim != 3 or min(self.occupancy.shape) < 1:
            raise ConfigurationError("occupancy must be a non-empty 3D array")
        if self.vectors.shape[:3] != self.occupancy.shape:
            raise ConfigurationError("vectors and occupancy shapes disagree")
        if self.mode not in ("categorical", "embedding"):
            raise ConfigurationError(f"unknown voxel mode {self.mode!r}")
        if self.resolution <= 0:
            raise ConfigurationError("resolution must be > 0")

    @property
    def dimensions(self) -> tuple[int, int, int]:
        nz, ny, nx = self.occupancy.shape
        return nx, ny, nz


@dataclass(frozen=True)
class SemanticGrid:
    """2D labeled grid with obstacle clearance distances in meters.

    ``edf`` is None until :func:`compute_edf` fills it; obstacle-free grids
    get ``+inf`` everywhere.
    """

    resolution: float
    labels: np.ndarray
    config: ClassConfig
    edf: np.ndarray | None = None
    _names: tuple[str, ...] = field(init=False, repr=False)

    def __post_init__(self):
        self.labels.setflags(write=False)
        if self.edf is not None:
            self.edf.setflags(write=False)
        object.__setattr__(self, "_names", self.config.label_names())

    @property
    def shape(self) -> tuple[int, int]:
        """(nx, ny) in cells."""
        ny, nx = self.labels.shape
        return nx, ny

    @property
    def extent(self) -> tuple[float, float]:
        """(width, height) in meters."""
        nx, ny = self.shape
        return nx * self.resolution, ny * self.resolution

    def code_of(self, name: str) -> int:
        try:
            return self._names.index(name)
        except ValueError:
            raise ConfigurationError(f"unknown label {name!r}") from None

    def name_of(self, code: int) -> str:
        return self._names[code]

    @cached_property
    def obstacle_mask(self) -> np.ndarray:
        mask = self.labels == OBSTACLE_CODE
        mask.setflags(write=False)
        return mask

    @cached_property
    def traversable_mask(self) -> np.ndarray:
        """Cells a robot may occupy: everything except obstacles."""
        mask = self.labels != OBSTACLE_CODE
        mask.setflags(write=False)
        return mask

    @cached_property
    def point_free_mask(self) -> np.ndarray:
        """Cells that count as free space for placing points: the free class
        and environment classes that do not impede traversal."""
        mask = self.labels == FREE_CODE
        for code, name in enumerate(self._names):
            if code < 2:
                continue
            if name in self.config.impeding_classes or name in self.config.task_classes:
                continue
            mask |= self.labels == code
        mask.setflags(write=False)
        return mask

    def cell_of_point(self, point) -> tuple[int, int]:
        """Point (x, y) in meters -> cell (ix, iy); points on the max edge
        clamp into the last cell."""
        x, y = float(point[0]), float(point[1])
        nx, ny = self.shape
        if not (0.0 <= x <= nx * self.resolution and 0.0 <= y <= ny * self.resolution):
            raise OutOfBoundsError(f"point ({x}, {y}) outside grid extent {self.extent}")
        ix = min(int(x / self.resolution), nx - 1)
        iy = min(int(y / self.resolution), ny - 1)
        return ix, iy

    def cell_center(self, cell) -> tuple[float, float]:
        ix, iy = cell
        return (ix + 0.5) * self.resolution, (iy + 0.5) * self.resolution

    def label_at_point(self, point) -> str:
        ix, iy = self.cell_of_point(point)
        return self.name_of(int(self.labels[iy, ix]))


def assign_label_categorical(probs, config: ClassConfig) -> str:
    """Pick the most probable class from a categorical vector.

    The vector is ordered like ``config.semantic_classes``; ties break to the
    lowest class index.  Scale does not matter (argmax invariance).
    """
    classes = config.semantic_classes
    vec = np.asarray(probs, dtype=float)
    if vec.shape != (len(classes),):
        raise ConfigurationError(
            f"probability vector has length {vec.size}, expected {len(classes)}"
        )
    if np.any(vec < 0):
        raise DegenerateInputError("probability vector has negative entries")
    if not np.any(vec > 0):
        raise DegenerateInputError("all-zero probability vector")
    return classes[int(np.argmax(vec))]


def assign_label_embedding(feature, class_embeddings) -> int:
    """Index of the class embedding with the largest cosine similarity.

    Ties break to the lowest index.  Raises on zero-norm vectors.
    """
    feat = np.asarray(feature, dtype=float)
    emb = np.asarray(class_embeddings, dtype=float)
    if emb.ndim != 2 or emb.shape[1] != feat.shape[0]:
        raise ConfigurationError(
            f"class embeddings shape {emb.shape} incompatible with feature of length {feat.size}"
        )
    fn = np.linalg.norm(feat)
    en = np.linalg.norm(emb, axis=1)
    if fn == 0.0 or np.any(en == 0.0):
        raise DegenerateInputError("zero-norm vector in cosine comparison")
    sims = (emb @ feat) / (en * fn)
    return int(np.argmax(sims))


def _voxel_label_codes(stack: VoxelStack, config: ClassConfig, class_embeddings) -> np.ndarray:
    """Per-voxel index into ``config.semantic_classes`` (occupied voxels only;
    others are left at -1)."""
    occ = stack.occupancy
    codes = np.full(occ.shape, -1, dtype=np.int32)
    if not occ.any():
        return codes
    vecs = stack.vectors[occ]
    if stack.mode == "categorical":
        n_classes = len(config.semantic_classes)
        if vecs.shape[1] != n_classes:
            raise ConfigurationError(
                f"voxel vectors have {vecs.shape[1]} entries, config has {n_classes} classes"
            )
        if np.any(vecs < 0):
            raise DegenerateInputError("negative categorical probability in voxel stack")
        if np.any(~np.any(vecs > 0, axis=1)):
            raise DegenerateInputError("all-zero categorical vector on an occupied voxel")
        codes[occ] = np.argmax(vecs, axis=1)
    else:
        if class_embeddings is None:
            raise ConfigurationError("embedding stack requires class_embeddings")
        emb = np.asarray(class_embeddings, dtype=float)
        if emb.shape[0] != len(config.semantic_classes):
            raise ConfigurationError(
                f"{emb.shape[0]} class embeddings for {len(config.semantic_classes)} classes"
            )
        en = np.linalg.norm(emb, axis=1)
        fn = np.linalg.norm(vecs, axis=1)
        if np.any(en == 0.0) or np.any(fn == 0.0):
            raise DegenerateInputError("zero-norm vector in cosine comparison")
        sims = (vecs @ emb.T) / np.outer(fn, en)
        codes[occ] = np.argmax(sims, axis=1)
    return codes


def collapse_voxels(
    stack: VoxelStack,
    config: ClassConfig,
    class_embeddings=None,
) -> SemanticGrid:
    """Collapse a voxel stack onto a 2D grid using the precedence rule.

    Per column: occupied voxels with center height above the obstacle
    threshold make the cell an obstacle; otherwise task classes win, then
    impeding environment classes, then free space.  Within a tier the label
    of the highest voxel wins.  Returns a grid without clearance data.
    """
    nz, ny, nx = stack.occupancy.shape
    codes3 = _voxel_label_codes(stack, config, class_embeddings)
    semantic = config.semantic_classes
    names = config.label_names()
    sem_to_grid = np.array([names.index(c) for c in semantic], dtype=np.int16)

    task_set = set(config.task_classes)
    imp_set = config.impeding_classes
    tier = np.empty(len(semantic), dtype=np.int8)  # 0 task, 1 impeding, 2 free-ish
    for k, cname in enumerate(semantic):
        tier[k] = 0 if cname in task_set else (1 if cname in imp_set else 2)

    z_centers = (np.arange(nz) + 0.5) * stack.resolution
    above = z_centers > config.obstacle_height_threshold

    labels = np.full((ny, nx), FREE_CODE, dtype=np.int16)
    obstacle_cols = (stack.occupancy & above[:, None, None]).any(axis=0)
    labels[obstacle_cols] = OBSTACLE_CODE

    occupied = codes3 >= 0
    voxel_tier = np.where(occupied, tier[np.clip(codes3, 0, None)], np.int8(3))
    # Highest voxel per column within the best (lowest) tier present.
    col_tier = voxel_tier.min(axis=0)
    iz = np.arange(nz)[:, None, None]
    z_rank = np.where(voxel_tier == col_tier[None, :, :], iz, -1)
    top_iz = z_rank.max(axis=0)

    resolved = (~obstacle_cols) & (col_tier < 3) & (top_iz >= 0)
    yy, xx = np.nonzero(resolved)
    sem_codes = codes3[top_iz[yy, xx], yy, xx]
    labels[yy, xx] = sem_to_grid[sem_codes]

    return SemanticGrid(resolution=stack.resolution, labels=labels, config=config)


def compute_edf(grid: SemanticGrid) -> SemanticGrid:
    """Exact Euclidean distance (meters, center-to-center) to the nearest
    obstacle cell; returns a new grid with the field populated.

    Computed in cell-index space and scaled by resolution afterwards, so a
    value is always resolution times the square root of an integer.
    """
    obstacles = grid.obstacle_mask
    if not obstacles.any():
        edf = np.full(grid.labels.shape, np.inf)
    else:
        edf = ndimage.distance_transform_edt(~obstacles) * grid.resolution
    return replace(grid, edf=edf)
