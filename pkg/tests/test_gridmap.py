import numpy as np
import pytest

from choral.errors import ConfigurationError, DegenerateInputError, OutOfBoundsError
from choral.gridmap import (
    FREE_CODE,
    OBSTACLE_CODE,
    ClassConfig,
    EnvironmentClass,
    SemanticGrid,
    VoxelStack,
    assign_label_categorical,
    assign_label_embedding,
    collapse_voxels,
    compute_edf,
)


def brute_force_edf(obstacle_mask: np.ndarray, resolution: float) -> np.ndarray:
    """Reference distance field: min center-to-center distance over every
    obstacle cell, integer squared distances, scaled at the end."""
    ny, nx = obstacle_mask.shape
    oy, ox = np.nonzero(obstacle_mask)
    if len(oy) == 0:
        return np.full((ny, nx), np.inf)
    out = np.empty((ny, nx))
    for iy in range(ny):
        for ix in range(nx):
            d2 = (oy - iy) ** 2 + (ox - ix) ** 2
            out[iy, ix] = np.sqrt(d2.min()) * resolution
    return out


def simple_config(**kw) -> ClassConfig:
    return ClassConfig(
        task_classes=("animal",),
        environment_classes=(
            EnvironmentClass("pebbles", impedes_traversal=True),
            EnvironmentClass("grass", impedes_traversal=False),
        ),
        **kw,
    )


def grid_from_obstacles(mask: np.ndarray, resolution: float) -> SemanticGrid:
    labels = np.where(mask, OBSTACLE_CODE, FREE_CODE).astype(np.int16)
    return SemanticGrid(resolution=resolution, labels=labels, config=simple_config())


class TestAssignCategorical:
    def setup_method(self):
        self.config = ClassConfig(
            task_classes=(),
            environment_classes=(
                EnvironmentClass("grass"),
                EnvironmentClass("path"),
                EnvironmentClass("mud"),
            ),
        )

    def test_argmax(self):
        assert assign_label_categorical([0.1, 0.7, 0.2, 0.0], self.config) == "path"

    def test_tie_breaks_to_lowest_index(self):
        cfg = ClassConfig(task_classes=(), environment_classes=(EnvironmentClass("grass"), EnvironmentClass("path")))
        assert assign_label_categorical([0.5, 0.5, 0.0], cfg) == "grass"

    def test_scale_invariance(self):
        probs = [0.2, 1.4, 0.4, 0.1]
        assert assign_label_categorical(probs, self.config) == assign_label_categorical(
            [p / 2 for p in probs], self.config
        )

    def test_scale_invariance_random(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            vec = rng.random(4)
            c = rng.uniform(0.01, 100.0)
            assert assign_label_categorical(vec, self.config) == assign_label_categorical(c * vec, self.config)

    def test_length_mismatch(self):
        with pytest.raises(ConfigurationError):
            assign_label_categorical([0.5, 0.5], self.config)

    def test_all_zero(self):
        with pytest.raises(DegenerateInputError):
            assign_label_categorical([0.0, 0.0, 0.0, 0.0], self.config)

    def test_negative_entry(self):
        with pytest.raises(DegenerateInputError):
            assign_label_categorical([0.5, -0.1, 0.2, 0.0], self.config)


class TestAssignEmbedding:
    def test_exact_match(self):
        emb = np.eye(4)
        assert assign_label_embedding(emb[2], emb) == 2

    def test_cosine_scale_invariance(self):
        emb = np.array([[1.0, 2.0], [2.0, -1.0], [0.5, 0.5]])
        assert assign_label_embedding(3.0 * emb[1], emb) == 1

    def test_matches_exhaustive_cosine(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            emb = rng.normal(size=(4, 8))
            feat = rng.normal(size=8)
            best, best_sim = 0, -2.0
            for k in range(4):
                sim = float(feat @ emb[k]) / (np.linalg.norm(feat) * np.linalg.norm(emb[k]))
                if sim > best_sim:
                    best, best_sim = k, sim
            assert assign_label_embedding(feat, emb) == best

    def test_zero_norm_feature(self):
        with pytest.raises(DegenerateInputError):
            assign_label_embedding(np.zeros(3), np.eye(3))

    def test_zero_norm_class(self):
        emb = np.eye(3)
        emb[1] = 0.0
        with pytest.raises(DegenerateInputError):
            assign_label_embedding(np.ones(3), emb)


def categorical_stack(nx, ny, nz, resolution, config):
    """Everything unoccupied; caller fills occupancy + one-hot vectors."""
    n_classes = len(config.semantic_classes)
    occ = np.zeros((nz, ny, nx), dtype=bool)
    vec = np.zeros((nz, ny, nx, n_classes))
    return occ, vec


def one_hot(config, name):
    v = np.zeros(len(config.semantic_classes))
    v[config.semantic_classes.index(name)] = 1.0
    return v


class TestCollapse:
    def setup_method(self):
        self.config = simple_config()  # threshold 1.5 m

    def make_grid(self, occ, vec, resolution=0.8):
        stack = VoxelStack(resolution=resolution, occupancy=occ, vectors=vec)
        return collapse_voxels(stack, self.config)

    def test_high_voxel_becomes_obstacle(self):
        # voxel center z = (2 + 0.5) * 0.8 = 2.0 m, above the 1.5 m threshold
        occ, vec = categorical_stack(2, 2, 3, 0.8, self.config)
        occ[2, 0, 0] = True
        vec[2, 0, 0] = one_hot(self.config, "grass")
        grid = self.make_grid(occ, vec)
        assert grid.name_of(int(grid.labels[0, 0])) == "obstacle"
        assert grid.labels[1, 1] == FREE_CODE

    def test_task_beats_impeding_beats_free(self):
        occ, vec = categorical_stack(3, 1, 2, 0.5, self.config)
        # column 0: free + pebbles + animal stacked -> animal
        occ[0, 0, 0] = occ[1, 0, 0] = True
        vec[0, 0, 0] = one_hot(self.config, "animal")
        vec[1, 0, 0] = one_hot(self.config, "pebbles")
        # column 1: pebbles + free -> pebbles
        occ[0, 0, 1] = True
        vec[0, 0, 1] = one_hot(self.config, "pebbles")
        # column 2: nothing occupied -> free
        grid = self.make_grid(occ, vec, resolution=0.5)
        assert grid.name_of(int(grid.labels[0, 0])) == "animal"
        assert grid.name_of(int(grid.labels[0, 1])) == "pebbles"
        assert grid.labels[0, 2] == FREE_CODE

    def test_within_tier_highest_voxel_wins(self):
        cfg = ClassConfig(
            task_classes=("animal", "crate"),
            environment_classes=(EnvironmentClass("pebbles", True),),
        )
        occ = np.zeros((2, 1, 1), dtype=bool)
        vec = np.zeros((2, 1, 1, len(cfg.semantic_classes)))
        occ[:, 0, 0] = True
        vec[0, 0, 0, cfg.semantic_classes.index("animal")] = 1.0
        vec[1, 0, 0, cfg.semantic_classes.index("crate")] = 1.0
        grid = collapse_voxels(VoxelStack(resolution=0.5, occupancy=occ, vectors=vec), cfg)
        assert grid.name_of(int(grid.labels[0, 0])) == "crate"

    def test_non_impeding_class_retained_but_point_free(self):
        occ, vec = categorical_stack(1, 1, 1, 0.5, self.config)
        occ[0, 0, 0] = True
        vec[0, 0, 0] = one_hot(self.config, "grass")
        grid = self.make_grid(occ, vec, resolution=0.5)
        assert grid.name_of(int(grid.labels[0, 0])) == "grass"
        assert grid.point_free_mask[0, 0]
        assert grid.traversable_mask[0, 0]

    def test_precedence_never_violated_random(self):
        rng = np.random.default_rng(3)
        n_classes = len(self.config.semantic_classes)
        for _ in range(20):
            occ = rng.random((4, 6, 6)) < 0.4
            vec = rng.random((4, 6, 6, n_classes))
            stack = VoxelStack(resolution=0.6, occupancy=occ, vectors=vec)
            grid = collapse_voxels(stack, self.config)
            z_above = (np.arange(4) + 0.5) * 0.6 > self.config.obstacle_height_threshold
            for iy in range(6):
                for ix in range(6):
                    col_occ = occ[:, iy, ix]
                    name = grid.name_of(int(grid.labels[iy, ix]))
                    if (col_occ & z_above).any():
                        assert name == "obstacle"
                        continue
                    names = [
                        assign_label_categorical(vec[iz, iy, ix], self.config)
                        for iz in np.nonzero(col_occ)[0]
                    ]
                    if "animal" in names:
                        assert name == "animal"
                    elif "pebbles" in names:
                        assert name == "pebbles"
                    elif "grass" in names:
                        assert name in ("grass", "free")
                    else:
                        assert name == "free"

    def test_empty_stack_rejected(self):
        with pytest.raises(ConfigurationError):
            VoxelStack(
                resolution=0.5,
                occupancy=np.zeros((0, 2, 2), dtype=bool),
                vectors=np.zeros((0, 2, 2, 5)),
            )


class TestEdf:
    def test_345_triangle(self):
        mask = np.zeros((8, 8), dtype=bool)
        mask[0, 0] = True
        grid = compute_edf(grid_from_obstacles(mask, 0.1))
        assert grid.edf[4, 3] == pytest.approx(0.5, abs=0.0)
        assert grid.edf[0, 0] == 0.0

    def test_no_obstacles_infinite(self):
        mask = np.zeros((5, 7), dtype=bool)
        grid = compute_edf(grid_from_obstacles(mask, 0.2))
        assert np.all(np.isinf(grid.edf))

    def test_zero_iff_obstacle(self):
        rng = np.random.default_rng(11)
        mask = rng.random((20, 20)) < 0.15
        mask[0, 0] = True
        grid = compute_edf(grid_from_obstacles(mask, 0.3))
        assert np.array_equal(grid.edf == 0.0, mask)

    def test_matches_brute_force_random(self):
        rng = np.random.default_rng(42)
        for _ in range(10):
            mask = rng.random((32, 32)) < 0.10
            res = float(rng.choice([0.1, 0.25, 0.5, 1.0]))
            grid = compute_edf(grid_from_obstacles(mask, res))
            expected = brute_force_edf(mask, res)
            assert np.array_equal(grid.edf, expected)

    def test_original_grid_unmodified(self):
        mask = np.zeros((4, 4), dtype=bool)
        mask[2, 2] = True
        base = grid_from_obstacles(mask, 0.5)
        assert base.edf is None
        filled = compute_edf(base)
        assert base.edf is None and filled.edf is not None


class TestGridGeometry:
    def setup_method(self):
        mask = np.zeros((4, 6), dtype=bool)  # 6 wide, 4 tall
        self.grid = grid_from_obstacles(mask, 0.5)

    def test_shape_and_extent(self):
        assert self.grid.shape == (6, 4)
        assert self.grid.extent == (3.0, 2.0)

    def test_point_to_cell_roundtrip(self):
        assert self.grid.cell_of_point((0.74, 1.26)) == (1, 2)
        cx, cy = self.grid.cell_center((1, 2))
        assert (cx, cy) == (0.75, 1.25)

    def test_max_edge_clamps(self):
        assert self.grid.cell_of_point((3.0, 2.0)) == (5, 3)

    def test_out_of_bounds(self):
        with pytest.raises(OutOfBoundsError):
            self.grid.cell_of_point((3.01, 1.0))
        with pytest.raises(OutOfBoundsError):
            self.grid.cell_of_point((-0.01, 1.0))

    def test_labels_read_only(self):
        with pytest.raises(ValueError):
            self.grid.labels[0, 0] = 3


class TestClassConfig:
    def test_duplicate_names_rejected(self):
        with pytest.raises(ConfigurationError):
            ClassConfig(task_classes=("x",), environment_classes=(EnvironmentClass("x"),))

    def test_free_class_collision_rejected(self):
        with pytest.raises(ConfigurationError):
            ClassConfig(task_classes=("free",), environment_classes=())

    def test_reserved_obstacle_rejected(self):
        with pytest.raises(ConfigurationError):
            ClassConfig(task_classes=("obstacle",), environment_classes=())

    def test_semantic_order(self):
        cfg = simple_config()
        assert cfg.semantic_classes == ("animal", "pebbles", "grass", "free")
        assert cfg.label_names() == ("free", "obstacle", "animal", "pebbles", "grass")
        assert cfg.impeding_classes == frozenset({"pebbles"})
