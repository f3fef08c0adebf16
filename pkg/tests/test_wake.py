"""Wake model tests.

Two independent oracles guard the implementation: the circle overlap is
checked against direct numerical integration of chord lengths, and the
vectorised sweep kernel against a deliberately naive scalar
reimplementation of the same physics.
"""
import math

import numpy as np
import pytest

from windlayout.turbine import thrust_coefficient
from windlayout.wake import (
    combine_deficits,
    decay_factor,
    farm_velocities,
    overlap_area,
    pair_deficit,
    rotate_and_rank,
    waked_speed_table,
)

K_REF = decay_factor(90.0, 0.0002)


def overlap_by_integration(c, r1, r2, n=400_000):
    """Chord-length integration oracle for the circle intersection area."""
    lo, hi = max(-r1, c - r2), min(r1, c + r2)
    if hi <= lo:
        return 0.0
    x = np.linspace(lo, hi, n)
    h1 = np.sqrt(np.maximum(r1**2 - x**2, 0.0))
    h2 = np.sqrt(np.maximum(r2**2 - (x - c) ** 2, 0.0))
    return float(np.trapezoid(2.0 * np.minimum(h1, h2), x))


class TestDecayFactor:
    def test_frozen_offshore_value(self):
        assert decay_factor(90.0, 0.0002) == pytest.approx(0.038411299844556886, rel=1e-14)

    def test_rougher_terrain_wider_wake(self):
        assert decay_factor(90.0, 0.03) > decay_factor(90.0, 0.0002)

    def test_validation(self):
        with pytest.raises(ValueError):
            decay_factor(90.0, 0.0)
        with pytest.raises(ValueError):
            decay_factor(0.0001, 0.0002)


class TestOverlapArea:
    def test_disjoint_exactly_zero(self):
        assert overlap_area(200.0, 100.0, 63.0) == 0.0

    def test_tangent_exactly_zero(self):
        assert overlap_area(163.0, 100.0, 63.0) == 0.0

    def test_containment_exact_rotor_area(self):
        assert overlap_area(10.0, 100.0, 63.0) == pytest.approx(math.pi * 63.0**2, rel=1e-14)

    def test_coincident_equal_circles(self):
        assert overlap_area(0.0, 63.0, 63.0) == pytest.approx(math.pi * 63.0**2, rel=1e-14)

    def test_equal_circles_half_known_value(self):
        # Two unit circles at distance 1: lens area = 2 pi/3 - sqrt(3)/2.
        expected = 2.0 * math.pi / 3.0 - math.sqrt(3.0) / 2.0
        assert overlap_area(1.0, 1.0, 1.0) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize(
        "c,r1,r2",
        [
            (80.0, 100.0, 63.0),
            (120.0, 100.0, 63.0),
            (150.0, 100.0, 63.0),
            (40.0, 70.0, 63.0),
            (63.0, 63.0, 63.0),
            (100.0, 170.0, 63.0),
        ],
    )
    def test_matches_integration_oracle(self, c, r1, r2):
        assert overlap_area(c, r1, r2) == pytest.approx(
            overlap_by_integration(c, r1, r2), rel=2e-4
        )

    def test_monotone_in_distance(self):
        areas = [overlap_area(c, 100.0, 63.0) for c in np.linspace(0, 170, 60)]
        assert all(a >= b - 1e-9 for a, b in zip(areas, areas[1:]))

    def test_validation(self):
        with pytest.raises(ValueError):
            overlap_area(-1.0, 100.0, 63.0)
        with pytest.raises(ValueError):
            overlap_area(10.0, 0.0, 63.0)


class TestPairDeficit:
    def test_frozen_hand_value(self):
        # Full overlap at 504 m with ct = 0.8 and the offshore decay rate.
        a_full = math.pi * 63.0**2
        assert pair_deficit(0.8, 504.0, a_full, 0.038411299844556886, 63.0) == pytest.approx(
            0.32345450935120956, rel=1e-12
        )

    def test_linear_in_overlap_area(self):
        a_full = math.pi * 63.0**2
        full = pair_deficit(0.7, 600.0, a_full, K_REF, 63.0)
        half = pair_deficit(0.7, 600.0, a_full / 2.0, K_REF, 63.0)
        assert half == pytest.approx(full / 2.0, rel=1e-12)

    def test_zero_thrust_no_deficit(self):
        assert pair_deficit(0.0, 500.0, 100.0, K_REF, 63.0) == 0.0

    def test_decays_with_distance(self):
        a = math.pi * 63.0**2
        d1 = pair_deficit(0.8, 300.0, a, K_REF, 63.0)
        d2 = pair_deficit(0.8, 900.0, a, K_REF, 63.0)
        assert d1 > d2 > 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            pair_deficit(0.8, 0.0, 100.0, K_REF, 63.0)
        with pytest.raises(ValueError):
            pair_deficit(1.0, 500.0, 100.0, K_REF, 63.0)
        with pytest.raises(ValueError):
            pair_deficit(0.8, 500.0, 1e9, K_REF, 63.0)


class TestCombineDeficits:
    def test_three_four_five(self):
        assert combine_deficits([0.3, 0.4]) == 0.5

    def test_empty_is_zero(self):
        assert combine_deficits([]) == 0.0

    def test_single_passthrough(self):
        assert combine_deficits([0.37]) == pytest.approx(0.37, rel=1e-15)

    def test_capped_at_one(self):
        assert combine_deficits([0.9, 0.9, 0.9]) == 1.0

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            combine_deficits([-0.1])
        with pytest.raises(ValueError):
            combine_deficits([1.1])


def scalar_waked_speeds(layout, spec, k, theta, v0):
    """Naive per-turbine reimplementation of the sweep, used as an oracle.

    Works in world coordinates with explicit loops: downwind separation
    via projection onto the flow vector, thrust at the upstream machine's
    waked speed, root-sum-square combination against the free stream.
    """
    pts = np.asarray(layout, dtype=float)
    n = pts.shape[0]
    rad = math.radians(theta)
    flow = np.array([-math.sin(rad), -math.cos(rad)])
    downwind = pts @ flow
    order = sorted(range(n), key=lambda i: (downwind[i], i))
    r = spec.rotor_radius
    speeds = np.empty(n)
    for rank, j in enumerate(order):
        terms = []
        for i in order[:rank]:
            d = downwind[j] - downwind[i]
            if d <= 0.0:
                continue
            offset = pts[j] - pts[i]
            lateral = abs(float(offset @ np.array([-flow[1], flow[0]])))
            shared = overlap_area(lateral, r + k * d, r)
            if shared == 0.0:
                continue
            ct = thrust_coefficient(spec, speeds[i])
            terms.append(pair_deficit(ct, d, shared, k, r))
        speeds[j] = v0 * (1.0 - combine_deficits(terms))
    return speeds


class TestSweepKernel:
    def test_matches_scalar_oracle(self, spec):
        rng = np.random.default_rng(17)
        layout = rng.uniform(0, 2500, size=(7, 2))
        thetas = [0.0, 37.5, 90.0, 223.0]
        grid = [4.0, 7.0, 9.5, 12.0, 24.0]
        table = waked_speed_table(layout, spec, K_REF, thetas, grid)
        assert table.shape == (4, 7, 5)
        for a, theta in enumerate(thetas):
            for g, v in enumerate(grid):
                expected = scalar_waked_speeds(layout, spec, K_REF, theta, v)
                assert np.allclose(table[a, :, g], expected, rtol=1e-10), (theta, v)

    def test_single_turbine_sees_free_stream(self, spec):
        table = waked_speed_table([[100.0, 200.0]], spec, K_REF, [0.0, 90.0], [8.0])
        assert np.all(table == 8.0)

    def test_most_upwind_turbine_unwaked(self, spec):
        layout = [[0.0, 0.0], [0.0, -700.0], [30.0, -1500.0]]
        v = farm_velocities(layout, spec, K_REF, 0.0, 9.0)
        assert v[0] == 9.0
        assert v[1] < 9.0 and v[2] < 9.0

    def test_aligned_pair_hand_value(self, spec):
        # Wind from north, follower 800 m straight downstream, k = 0.05.
        # Wake radius 103 m covers the whole rotor; ct(6.0) = 0.79 exactly.
        k = 0.05
        v = farm_velocities([[0.0, 0.0], [0.0, -800.0]], spec, k, 0.0, 6.0)
        deficit = (1.0 - math.sqrt(1.0 - 0.79)) / (1.0 + k * 800.0 / 63.0) ** 2
        assert v[0] == 6.0
        assert v[1] == pytest.approx(6.0 * (1.0 - deficit), rel=1e-12)

    def test_crosswind_pair_untouched(self, spec):
        # Side-by-side with respect to the flow: no interaction.
        v = farm_velocities([[0.0, 0.0], [504.0, 0.0]], spec, K_REF, 0.0, 9.0)
        assert np.all(v == 9.0)

    def test_thrust_uses_waked_upstream_speed(self, spec):
        # Three in a line: the middle machine runs slower, so its thrust
        # (and hence the tail deficit) differs from a free-stream estimate.
        layout = [[0.0, 0.0], [0.0, -600.0], [0.0, -1200.0]]
        v = farm_velocities(layout, spec, K_REF, 0.0, 10.0)
        ct_naive = thrust_coefficient(spec, 10.0)
        ct_waked = thrust_coefficient(spec, v[1])
        assert ct_waked > ct_naive  # slower rotor pushes harder here
        assert v[2] < v[1] < v[0]

    def test_translation_invariance(self, spec):
        rng = np.random.default_rng(5)
        layout = rng.uniform(0, 2000, size=(6, 2))
        t1 = waked_speed_table(layout, spec, K_REF, [70.0], [9.0])
        t2 = waked_speed_table(layout + [12345.0, -777.0], spec, K_REF, [70.0], [9.0])
        assert np.allclose(t1, t2, rtol=1e-12)

    def test_joint_rotation_invariance(self, spec):
        rng = np.random.default_rng(6)
        layout = rng.uniform(0, 2000, size=(6, 2))
        phi = 33.0
        rad = math.radians(phi)
        rot = np.array([[math.cos(rad), -math.sin(rad)], [math.sin(rad), math.cos(rad)]])
        turned = layout @ rot.T
        # Rotating the world CCW by phi turns a wind from theta into one
        # from theta - phi.
        t1 = waked_speed_table(layout, spec, K_REF, [80.0], [9.0])
        t2 = waked_speed_table(turned, spec, K_REF, [80.0 - phi], [9.0])
        assert np.allclose(t1, t2, rtol=1e-9)

    def test_speed_grid_axis_independent(self, spec):
        # Evaluating speeds one at a time matches the batched grid.
        rng = np.random.default_rng(8)
        layout = rng.uniform(0, 1500, size=(5, 2))
        grid = np.array([5.0, 8.0, 11.0])
        batched = waked_speed_table(layout, spec, K_REF, [120.0], grid)
        for g, v in enumerate(grid):
            single = waked_speed_table(layout, spec, K_REF, [120.0], [v])
            assert np.allclose(batched[:, :, g], single[:, :, 0], rtol=1e-14)

    def test_zero_wind(self, spec):
        v = farm_velocities([[0.0, 0.0], [0.0, -600.0]], spec, K_REF, 0.0, 0.0)
        assert np.all(v == 0.0)

    def test_rotate_and_rank_orders_upwind_first(self):
        order = rotate_and_rank([[0.0, 0.0], [0.0, 500.0]], 0.0).order
        # Wind from north: the northern turbine (larger y) is upwind.
        assert list(order) == [1, 0]
