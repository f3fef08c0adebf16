"""Multistart orchestration: per-restart rng streams, the energy NLP's
Jacobian, the reference grid, the ordered best-of reduction, and the
end-to-end optimizer on small sites."""
import numpy as np
import pytest

from windlayout.aep import expected_aep
from windlayout.driver import (
    RestartRecord,
    RunConfig,
    _reduce_records,
    grid_layout,
    layout_problem,
    minimum_distance,
    optimize_layout,
    restart_rng,
    rms_distance,
    rose_rotation_sensitivity,
    saturation_sweep,
)
from windlayout.geometry import containment_margins, is_feasible
from windlayout.seeding import SeedingInfeasible
from windlayout.solver import SolverOptions, fd_gradient
from windlayout.wake import decay_factor

from conftest import uniform_rose


def cheap_config(**overrides) -> RunConfig:
    base = dict(
        restarts=2,
        seed=0,
        dv=0.5,
        coarse_dv=0.5,
        coarse=SolverOptions(max_iter=50),
        polish=SolverOptions(mode="polish", max_iter=80),
        seed_retries=5,
    )
    base.update(overrides)
    return RunConfig(**base)


def record(index: int, end: float, ok: bool = True) -> RestartRecord:
    layout = np.zeros((1, 2)) if ok else None
    return RestartRecord(index, 0.0, end if ok else float("nan"),
                         "converged" if ok else "seeding-infeasible", layout, layout)


class TestSpacingRule:
    def test_four_rotor_diameters(self, spec):
        assert minimum_distance(spec) == pytest.approx(4.0 * 126.0)


class TestRestartRng:
    def test_streams_are_reproducible(self):
        a = restart_rng(7, 3).random(5)
        b = restart_rng(7, 3).random(5)
        assert np.array_equal(a, b)

    def test_streams_differ_across_indices_and_seeds(self):
        base = restart_rng(7, 3).random(5)
        assert not np.array_equal(base, restart_rng(7, 4).random(5))
        assert not np.array_equal(base, restart_rng(8, 3).random(5))

    def test_counter_based_generator_backs_the_stream(self):
        explicit = np.random.Generator(
            np.random.Philox(key=np.array([7, 3], dtype=np.uint64))
        ).random(5)
        assert np.array_equal(restart_rng(7, 3).random(5), explicit)


class TestLayoutProblem:
    def test_objective_is_the_farm_energy(self, spec, square_km):
        rose = uniform_rose(4)
        problem = layout_problem(square_km, spec, rose, 3, dv=0.5)
        layout = np.array([[100.0, 100.0], [800.0, 200.0], [400.0, 850.0]])
        k = decay_factor(spec.hub_height, rose.z0)
        assert problem.objective(layout.ravel()) == pytest.approx(
            expected_aep(layout, spec, rose, k, dv=0.5).total, rel=1e-14
        )

    def test_constraint_count_and_dimension(self, spec, square_km):
        problem = layout_problem(square_km, spec, uniform_rose(4), 5, dv=0.5)
        assert problem.dimension == 10
        assert len(problem.constraints) == 10 + 20

    def test_analytic_jacobian_matches_finite_differences(self, spec, square_km):
        problem = layout_problem(square_km, spec, uniform_rose(4), 3, dv=0.5)
        x = np.array([120.0, 140.0, 790.0, 230.0, 420.0, 830.0])
        for c, g in zip(problem.constraints, problem.constraint_gradients):
            # margins are quadratic or linear in the coordinates, so central
            # differences are exact up to roundoff
            assert g(x) == pytest.approx(fd_gradient(c, x, h=0.5), abs=1e-10)

    def test_single_turbine_has_containment_rows_only(self, spec, square_km):
        problem = layout_problem(square_km, spec, uniform_rose(4), 1, dv=0.5)
        assert len(problem.constraints) == 4
        inside = np.array([500.0, 500.0])
        vals = np.array([c(inside) for c in problem.constraints])
        d_min = minimum_distance(spec)
        expect = containment_margins(inside.reshape(1, 2), square_km) / d_min**2
        assert vals == pytest.approx(expect, rel=1e-12)


class TestGridLayout:
    def test_replica_site_gets_the_exact_three_by_four(self, replica_boundary):
        grid = grid_layout(replica_boundary, 12)
        assert grid.shape == (12, 2)
        xs = np.unique(np.round(grid[:, 0], 6))
        ys = np.unique(np.round(grid[:, 1], 6))
        assert xs == pytest.approx([0.0, 800.0, 1600.0])
        assert ys == pytest.approx([0.0, 2300.0 / 3.0, 4600.0 / 3.0, 2300.0])
        assert is_feasible(grid, replica_boundary, 504.0, tol=0.0).feasible

    def test_partial_last_row_keeps_the_count(self, square_km):
        grid = grid_layout(square_km, 7)
        assert grid.shape == (7, 2)
        assert np.all(containment_margins(grid, square_km) >= -1e-9)
        assert len(np.unique(grid, axis=0)) == 7

    def test_single_point_sits_inside(self, square_km):
        grid = grid_layout(square_km, 1)
        assert grid.shape == (1, 2)
        assert np.all(containment_margins(grid, square_km) >= 0.0)

    def test_corners_land_on_corners(self, replica_boundary):
        grid = grid_layout(replica_boundary, 12)
        for corner in replica_boundary.corners:
            assert np.min(np.linalg.norm(grid - corner, axis=1)) < 1e-9

    def test_rejects_empty_grid(self, square_km):
        with pytest.raises(ValueError):
            grid_layout(square_km, 0)


class TestRmsDistance:
    def test_hand_values(self):
        assert rms_distance([[0.0, 0.0], [2.0, 0.0]]) == pytest.approx(2.0)
        triangle = [[0.0, 0.0], [3.0, 0.0], [3.0, 4.0]]  # sides 3, 4, 5
        assert rms_distance(triangle) == pytest.approx(np.sqrt(50.0 / 3.0))

    def test_single_point_is_undefined(self):
        assert np.isnan(rms_distance([[1.0, 1.0]]))


class TestReduceRecords:
    def test_without_stalling_every_record_is_used(self):
        recs = [record(0, 5.0), record(1, 9.0), record(2, 9.0), record(3, 7.0)]
        used, best = _reduce_records(iter(recs), RunConfig(restarts=4, stall_limit=0))
        assert len(used) == 4
        assert best.index == 1  # strict improvement keeps the earlier tie

    def test_stall_limit_stops_the_scan_in_index_order(self):
        recs = [record(0, 5.0), record(1, 4.0), record(2, 3.0), record(3, 9.0)]
        used, best = _reduce_records(iter(recs), RunConfig(restarts=4, stall_limit=2))
        assert [r.index for r in used] == [0, 1, 2]
        assert best.index == 0  # the later 9.0 is deliberately never seen

    def test_improvement_resets_the_stall_counter(self):
        recs = [record(0, 5.0), record(1, 4.0), record(2, 6.0), record(3, 3.0), record(4, 2.0)]
        used, best = _reduce_records(iter(recs), RunConfig(restarts=5, stall_limit=2))
        assert len(used) == 5
        assert best.index == 2

    def test_failed_seedings_never_win(self):
        recs = [record(0, 0.0, ok=False), record(1, 0.0, ok=False)]
        used, best = _reduce_records(iter(recs), RunConfig(restarts=2))
        assert best is None
        assert len(used) == 2


class TestOptimizeLayout:
    def test_small_farm_end_to_end(self, spec, square_km):
        rose = uniform_rose(4)
        out = optimize_layout(square_km, spec, rose, 3, cheap_config())
        assert out.best_layout.shape == (3, 2)
        assert is_feasible(out.best_layout, square_km, 504.0, tol=1e-6).feasible
        assert out.restarts_run == 2
        assert len(out.per_restart) == 2
        assert out.best_index in (0, 1)
        ends = [r.end_aep for r in out.per_restart]
        assert out.best_index == int(np.argmax(ends))
        # the polish never gives back what the coarse stage won
        assert out.best_aep.total >= max(ends) - 1e-9
        for r in out.per_restart:
            assert r.end_aep >= r.start_aep - 1e-9
        assert out.wall_time > 0.0

    def test_runs_are_deterministic(self, spec, square_km):
        rose = uniform_rose(4)
        a = optimize_layout(square_km, spec, rose, 3, cheap_config())
        b = optimize_layout(square_km, spec, rose, 3, cheap_config())
        assert np.array_equal(a.best_layout, b.best_layout)
        assert a.best_aep.total == b.best_aep.total
        assert [r.end_aep for r in a.per_restart] == [r.end_aep for r in b.per_restart]

    def test_worker_pool_matches_serial_bit_for_bit(self, spec, square_km):
        rose = uniform_rose(4)
        serial = optimize_layout(square_km, spec, rose, 3, cheap_config())
        pooled = optimize_layout(square_km, spec, rose, 3, cheap_config(worker_count=2))
        assert np.array_equal(serial.best_layout, pooled.best_layout)
        assert serial.best_index == pooled.best_index

    def test_overfull_site_raises(self, spec, replica_boundary):
        cfg = cheap_config(restarts=1, seed_retries=2)
        with pytest.raises(SeedingInfeasible):
            optimize_layout(replica_boundary, spec, uniform_rose(4), 23, cfg)

    def test_rejects_empty_farm(self, spec, square_km):
        with pytest.raises(ValueError):
            optimize_layout(square_km, spec, uniform_rose(4), 0, cheap_config())


class TestRunConfigValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"restarts": 0},
            {"stall_limit": -1},
            {"worker_count": 0},
            {"dv": 0.0},
            {"coarse_dv": -0.5},
            {"seed_retries": 0},
            {"seed": -1},
        ],
    )
    def test_bad_settings_raise(self, kwargs):
        with pytest.raises(ValueError):
            RunConfig(**kwargs)


class TestSaturationSweep:
    def test_rows_are_tabulated_per_count(self, spec, square_km):
        rose = uniform_rose(4)
        rows = saturation_sweep(square_km, spec, rose, [1, 3], cheap_config(restarts=1))
        assert [r.n_t for r in rows] == [1, 3]
        assert all(r.feasible for r in rows)
        lone = rows[0]
        assert lone.efficiency == pytest.approx(100.0, abs=1e-9)
        assert np.isnan(lone.rms_distance)
        assert 50.0 < rows[1].efficiency <= 100.0
        assert rows[1].rms_distance > 504.0

    def test_saturated_count_reports_infeasible_instead_of_raising(self, spec, square_km):
        rose = uniform_rose(4)
        cfg = cheap_config(restarts=1, seed_retries=2)
        rows = saturation_sweep(square_km, spec, rose, [2, 30], cfg)
        assert rows[0].feasible
        assert not rows[1].feasible
        assert np.isnan(rows[1].best_aep) and np.isnan(rows[1].efficiency)

    def test_counts_must_ascend_without_duplicates(self, spec, square_km):
        with pytest.raises(ValueError):
            saturation_sweep(square_km, spec, uniform_rose(4), [3, 2])
        with pytest.raises(ValueError):
            saturation_sweep(square_km, spec, uniform_rose(4), [2, 2])
        with pytest.raises(ValueError):
            saturation_sweep(square_km, spec, uniform_rose(4), [])


class TestRoseRotationSensitivity:
    def test_uniform_rose_is_rotation_blind_for_the_grid(self, spec, square_km):
        rose = uniform_rose(4)
        rows = rose_rotation_sensitivity(
            square_km, spec, rose, 2, [0.0, 90.0], cheap_config(restarts=1)
        )
        assert [r.angle for r in rows] == [0.0, 90.0]
        assert rows[0].grid_aep == pytest.approx(rows[1].grid_aep, rel=1e-12)
        for r in rows:
            assert r.optimized_aep > 0.0
            assert 0.0 <= r.optimized_loss <= r.grid_loss + 5.0

    def test_rejects_non_finite_angles(self, spec, square_km):
        with pytest.raises(ValueError):
            rose_rotation_sensitivity(
                square_km, spec, uniform_rose(4), 2, [float("nan")], cheap_config()
            )
