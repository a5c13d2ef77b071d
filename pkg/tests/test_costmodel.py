import numpy as np
import pytest

from conftest import DEFAULT_CONFIG, grid_from_ascii
from choral.costmodel import (
    CostMatrix,
    EdgeCost,
    RobotProfile,
    accident_rate,
    build_cost_matrices,
    collision_rate,
    edge_cost,
    exposure,
    safety_cost,
    time_cost,
)
from choral.errors import ConfigurationError, OutOfBoundsError
from choral.gridmap import SemanticGrid, compute_edf
from choral.roadmap import all_pairs_paths, build_prm
from choral.taskextract import InspectionTask


def ground(**kw):
    base = dict(
        id="ground",
        nominal_velocity=0.25,
        lambda_trav={"pebbles": 0.05, "grass": 1e-5, "free": 1e-5},
        beta=10.0,
        d_half=0.5,
        alpha=50.0,
    )
    base.update(kw)
    return RobotProfile(**base)


def aerial(**kw):
    base = dict(
        id="aerial",
        nominal_velocity=0.5,
        lambda_trav={"pebbles": 1e-5, "grass": 1e-5, "free": 1e-5},
        beta=10.0,
        d_half=0.5,
        alpha=50.0,
    )
    base.update(kw)
    return RobotProfile(**base)


def open_rough_grid(width_m: float, resolution: float = 0.5) -> SemanticGrid:
    """No obstacles, every cell the impeding class."""
    nx = int(round(width_m / resolution))
    code = 3  # pebbles under DEFAULT_CONFIG ordering
    labels = np.full((5, nx), code, dtype=np.int16)
    return compute_edf(SemanticGrid(resolution=resolution, labels=labels, config=DEFAULT_CONFIG))


def mk_task(tid, x, y):
    return InspectionTask(
        id=tid, member_cells=(), centroid=(x, y), inspection_point=(x, y), source_class="animal"
    )


class TestRates:
    def test_logistic_midpoint_exact(self):
        rob = ground()
        assert collision_rate(rob, rob.d_half) == 0.5

    def test_far_clearance_value(self):
        rob = ground()
        assert float(collision_rate(rob, 1.5)) == pytest.approx(1.0 / (1.0 + np.exp(10.0)), rel=1e-12)

    def test_infinite_clearance_zero(self):
        assert float(collision_rate(ground(), np.inf)) == 0.0

    def test_monotone_decreasing(self):
        rob = ground()
        ds = np.linspace(0.0, 3.0, 50)
        vals = collision_rate(rob, ds)
        assert np.all(np.diff(vals) < 0)

    def test_logistic_symmetry(self):
        rob = ground()
        for d in [0.1, 0.3, 0.45, 0.8, 1.0]:
            lo = float(collision_rate(rob, d))
            hi = float(collision_rate(rob, 2 * rob.d_half - d))
            assert lo + hi == pytest.approx(1.0, abs=1e-12)

    def test_terrain_lookup(self):
        rob = ground()
        assert accident_rate(rob, "pebbles", np.inf) == pytest.approx(0.05)
        assert accident_rate(rob, "unknown-class", np.inf) == 0.0

    def test_rate_weights(self):
        rob = ground(weight_trav=2.0, weight_coll=0.0)
        assert accident_rate(rob, "pebbles", 0.5) == pytest.approx(0.1)


class TestTimeCost:
    def test_basic(self):
        assert time_cost(10.0, aerial()) == 20.0
        assert time_cost(0.0, aerial()) == 0.0

    def test_velocity_ratio_exact(self):
        for length in [1.0, 3.7, 12.34, 200.0]:
            assert time_cost(length, ground()) / time_cost(length, aerial()) == 2.0

    def test_velocity_monotone(self):
        ts = [time_cost(9.0, ground(nominal_velocity=v)) for v in (0.1, 0.5, 1.0, 2.0)]
        assert ts == sorted(ts, reverse=True)

    def test_negative_rejected(self):
        with pytest.raises(ConfigurationError):
            time_cost(-1.0, ground())


class TestSafetyCost:
    def test_zero_rate_path(self):
        grid = grid_from_ascii("....\n....\n....", resolution=0.5)
        rob = ground(lambda_trav={})
        assert safety_cost([(0.2, 0.7), (1.8, 0.7)], rob, grid) == 0.0

    def test_twenty_meters_difficult_terrain(self):
        grid = open_rough_grid(22.0)
        rob = ground()
        got = safety_cost([(0.5, 1.25), (20.5, 1.25)], rob, grid)
        assert got == pytest.approx(1.0 - np.exp(-1.0), abs=1e-6)

    def test_concatenation_monotone(self):
        grid = open_rough_grid(22.0)
        rob = ground()
        a, m, b = (0.5, 1.25), (10.5, 1.25), (20.5, 1.25)
        whole = safety_cost([a, m, b], rob, grid)
        assert whole >= safety_cost([a, m], rob, grid)
        assert whole >= safety_cost([m, b], rob, grid)

    def test_exponent_additivity_exact(self):
        grid = open_rough_grid(22.0)
        rob = ground()
        a, m, b = (0.5, 1.25), (10.5, 1.25), (20.5, 1.25)
        t1, c1 = exposure([a, m], rob, grid)
        t2, c2 = exposure([m, b], rob, grid)
        tw, cw = exposure([a, m, b], rob, grid)
        assert tw == pytest.approx(t1 + t2, rel=1e-12)
        assert cw == pytest.approx(c1 + c2, rel=1e-12)

    def test_riemann_refinement_grazing_path(self):
        grid = grid_from_ascii(
            """
            ..........
            ..#....#..
            ..........
            .......#..
            ..........
            """,
            resolution=0.3,
        )
        rob = ground()
        path = [(0.15, 0.15), (2.55, 0.75), (1.05, 1.35)]
        coarse = safety_cost(path, rob, grid)
        fine = safety_cost(path, rob, grid, spacing=grid.resolution / 2)
        assert abs(coarse - fine) < 1e-3

    def test_riemann_refinement_roadmap_paths(self):
        rng = np.random.default_rng(12)
        labels = (rng.random((30, 30)) < 0.15).astype(np.int16)
        grid = compute_edf(SemanticGrid(resolution=0.5, labels=labels, config=DEFAULT_CONFIG))
        from scipy import ndimage

        comp, _ = ndimage.label(grid.traversable_mask, structure=np.ones((3, 3), bool))
        counts = np.bincount(comp.ravel())
        counts[0] = 0
        ys, xs = np.nonzero(comp == int(np.argmax(counts)))
        idx = rng.choice(len(ys), size=6, replace=False)
        pts = [((xs[i] + 0.5) * 0.5, (ys[i] + 0.5) * 0.5) for i in idx]
        rm = build_prm(grid, [mk_task(i + 1, *p) for i, p in enumerate(pts[1:])], [pts[0]], seed=3)
        table = all_pairs_paths(rm)
        rob = ground()
        for i in range(rm.n_terminals):
            for j in range(i + 1, rm.n_terminals):
                poly = table.polyline(i, j)
                coarse = safety_cost(poly, rob, grid)
                fine = safety_cost(poly, rob, grid, spacing=grid.resolution / 2)
                assert abs(coarse - fine) < 1e-3

    def test_sample_out_of_bounds(self):
        grid = grid_from_ascii("....", resolution=0.5)
        with pytest.raises(OutOfBoundsError):
            safety_cost([(0.1, 0.1), (5.0, 0.1)], ground(), grid)

    def test_requires_edf(self):
        grid = grid_from_ascii("....", with_edf=False)
        with pytest.raises(ConfigurationError):
            safety_cost([(0.05, 0.05), (0.3, 0.05)], ground(), grid)

    def test_pebble_crossing_blocks(self):
        rob = ground(lambda_trav={"pebbles": 5.0})
        grid = open_rough_grid(4.0)
        got = safety_cost([(1.0, 1.25), (2.0, 1.25)], rob, grid)
        assert got > 0.99


class TestEdgeCost:
    def test_alpha_zero_is_time(self):
        grid = open_rough_grid(10.0)
        rob = ground(alpha=0.0)
        path = [(0.5, 1.25), (8.5, 1.25)]
        ec = edge_cost(path, rob, grid)
        assert ec.combined == ec.time_s == time_cost(8.0, rob)

    def test_arithmetic(self):
        ec = EdgeCost(time_s=20.0, safety_prob=0.6321, alpha=100.0)
        assert ec.combined == pytest.approx(83.21)

    def test_alpha_monotone(self):
        grid = open_rough_grid(10.0)
        path = [(0.5, 1.25), (8.5, 1.25)]
        c1 = edge_cost(path, ground(alpha=50.0), grid).combined
        c2 = edge_cost(path, ground(alpha=100.0), grid).combined
        assert c2 >= c1


class TestProfileValidation:
    def test_bad_velocity(self):
        with pytest.raises(ConfigurationError):
            ground(nominal_velocity=0.0)

    def test_negative_rate(self):
        with pytest.raises(ConfigurationError):
            ground(lambda_trav={"grass": -0.1})

    def test_bad_capacity(self):
        with pytest.raises(ConfigurationError):
            ground(capacity=0.0)


class TestCostMatrices:
    def build(self, robots, art=None, depot=(0.25, 0.25)):
        grid = grid_from_ascii(
            art
            or """
            ..........
            ..........
            ..........
            ..........
            ..........
            """,
            resolution=0.5,
        )
        tasks = [mk_task(1, 3.75, 0.75), mk_task(2, 1.25, 1.75)]
        rm = build_prm(grid, tasks, [depot], seed=0)
        table = all_pairs_paths(rm)
        return grid, table, build_cost_matrices(table, robots, grid)

    def test_contract_invariants(self):
        _, _, mats = self.build([ground(), aerial()])
        for cm in mats:
            assert np.all(np.diag(cm.combined) == 0.0)
            assert np.all(cm.combined[1:, 0] == 0.0)
            assert np.all(cm.time_s[1:, 0] == 0.0)
            assert np.all(cm.safety_prob[1:, 0] == 0.0)
            assert np.all(cm.combined >= 0.0)
            assert np.all((cm.safety_prob >= 0.0) & (cm.safety_prob < 1.0))

    def test_symmetric_offdiagonal(self):
        _, _, mats = self.build([ground()])
        cm = mats[0]
        assert cm.combined[1, 2] == cm.combined[2, 1]
        assert cm.combined[1, 0] == 0.0 and cm.combined[2, 0] == 0.0
        assert cm.combined[0, 1] > 0.0

    def test_velocity_scales_time_component(self):
        _, _, mats = self.build([ground(), aerial()])
        g, a = mats
        assert np.allclose(g.time_s[0, 1:], 2.0 * a.time_s[0, 1:], rtol=1e-12)
        assert np.array_equal(g.distance, a.distance)

    def test_matrix_matches_direct_edge_cost(self):
        grid, table, mats = self.build([ground()])
        cm = mats[0]
        rob = cm.robot
        for i, j in [(0, 1), (0, 2), (1, 2)]:
            poly = table.polyline(i, j)
            assert cm.safety_prob[i, j] == pytest.approx(safety_cost(poly, rob, grid), rel=1e-9)
            assert cm.time_s[i, j] == pytest.approx(
                time_cost(table.length(i, j), rob), rel=1e-12
            )
            assert cm.combined[i, j] == pytest.approx(
                cm.time_s[i, j] + rob.alpha * cm.safety_prob[i, j], rel=1e-12
            )

    def test_task_ids_recorded(self):
        _, _, mats = self.build([ground()])
        assert mats[0].task_ids == [None, 1, 2]

    def test_multi_depot_assignment(self):
        grid = grid_from_ascii(
            """
            ..........
            ..........
            ..........
            """,
            resolution=0.5,
        )
        tasks = [mk_task(1, 3.75, 0.75)]
        depots = [(0.25, 0.25), (4.75, 1.25)]
        rm = build_prm(grid, tasks, depots, seed=0)
        table = all_pairs_paths(rm)
        mats = build_cost_matrices(table, [ground(), aerial()], grid, depot_of_robot=[0, 1])
        assert mats[0].distance[0, 1] == table.length(0, 2)
        assert mats[1].distance[0, 1] == table.length(1, 2)

    def test_obstacle_proximity_prices_paths(self):
        art = """
        ..........
        ..........
        ....##....
        ..........
        ..........
        """
        _, _, near = self.build([ground()], art=art)
        _, _, far = self.build([ground()])
        # same endpoints; the wall adds collision exposure on the 1-2 leg
        assert near[0].safety_prob[1, 2] > far[0].safety_prob[1, 2]
