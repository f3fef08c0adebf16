"""Top-hat wake model on a flat offshore site.

Each rotor sheds a cone that widens linearly with downstream distance at
a decay rate set by surface roughness. A downstream rotor partially
covered by the cone sees a velocity deficit proportional to the covered
fraction of its disc; deficits from several upstream machines combine as
the root of the sum of squares. Evaluation sweeps turbines from upwind
to downwind so every deficit only depends on already-computed speeds.

Wind directions are compass angles: degrees clockwise from north, naming
where the wind comes from. The evaluation frame is rotated so the flow
runs toward -y', which makes "upstream" simply "larger y'".
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import as_layout
from .turbine import TurbineSpec, thrust_coefficient


def decay_factor(z: float, z0: float) -> float:
    """Wake expansion rate k = 1 / (2 ln(z / z0)) for hub height z."""
    if not (z > z0 > 0):
        raise ValueError("need z > z0 > 0")
    return 1.0 / (2.0 * math.log(z / z0))


@dataclass(frozen=True)
class RotatedOrder:
    """Layout in the flow-aligned frame plus the upwind-to-downwind order.

    rotated[i] are the coordinates of turbine i; order lists turbine
    indices by descending y' (most upwind first), ties broken by original
    index.
    """

    theta: float
    rotated: np.ndarray
    order: np.ndarray


def rotate_and_rank(layout, theta: float) -> RotatedOrder:
    """Rotate a layout so wind from compass angle theta flows toward -y'."""
    pts = as_layout(layout)
    rad = math.radians(theta)
    c, s = math.cos(rad), math.sin(rad)
    rotated = np.column_stack(
        (pts[:, 0] * c - pts[:, 1] * s, pts[:, 0] * s + pts[:, 1] * c)
    )
    order = np.argsort(-rotated[:, 1], kind="stable")
    return RotatedOrder(theta, rotated, order)


def _overlap_area_arr(c, r1, r2):
    """Intersection area of circles with radii r1, r2 at centre distance c.

    Vectorised over broadcastable inputs. Handles the disjoint, partially
    overlapping and fully contained cases; the lens case uses the
    circular-segment formula with arguments clipped for roundoff.
    """
    c, r1, r2 = np.broadcast_arrays(
        np.asarray(c, float), np.asarray(r1, float), np.asarray(r2, float)
    )
    small = np.minimum(r1, r2)
    contained = c <= np.abs(r1 - r2)
    partial = ~contained & (c < r1 + r2)
    # Guard the lens arguments where they are not used.
    cg = np.where(partial, c, 1.0)
    r1g = np.where(r1 > 0, r1, 1.0)
    r2g = np.where(r2 > 0, r2, 1.0)
    t1 = np.arccos(np.clip((cg**2 + r1**2 - r2**2) / (2.0 * cg * r1g), -1.0, 1.0))
    t2 = np.arccos(np.clip((cg**2 + r2**2 - r1**2) / (2.0 * cg * r2g), -1.0, 1.0))
    sq = (-cg + r1 + r2) * (cg + r1 - r2) * (cg - r1 + r2) * (cg + r1 + r2)
    lens = r1**2 * t1 + r2**2 * t2 - 0.5 * np.sqrt(np.maximum(sq, 0.0))
    return np.where(contained, math.pi * small**2, np.where(partial, lens, 0.0))


def overlap_area(c: float, r_wake: float, r_rotor: float) -> float:
    """Area shared by a wake disc of radius r_wake and a rotor disc of
    radius r_rotor whose centres are c apart (all metres, area in m^2)."""
    if c < 0:
        raise ValueError("centre distance must be non-negative")
    if r_wake <= 0 or r_rotor <= 0:
        raise ValueError("radii must be positive")
    return float(_overlap_area_arr(c, r_wake, r_rotor))


def pair_deficit(ct: float, d: float, a_overlap: float, k: float, r_rotor: float) -> float:
    """Fractional velocity deficit one wake imposes on one rotor.

    ct is the upstream thrust coefficient, d > 0 the downstream
    separation, a_overlap the wake/rotor shared area, k the decay factor
    and r_rotor the rotor radius. The deficit is

        (1 - sqrt(1 - ct)) / (1 + k d / r_rotor)^2 * a_overlap / rotor area

    and always lies in [0, 1).
    """
    if d <= 0:
        raise ValueError("downstream separation must be positive")
    if not (0.0 <= ct < 1.0):
        raise ValueError("thrust coefficient must lie in [0, 1)")
    if k <= 0 or r_rotor <= 0:
        raise ValueError("decay factor and rotor radius must be positive")
    rotor_area = math.pi * r_rotor**2
    wake_area = math.pi * (r_rotor + k * d) ** 2
    if not (0.0 <= a_overlap <= max(rotor_area, wake_area) * (1.0 + 1e-12)):
        raise ValueError("overlap area outside the geometrically possible range")
    return (1.0 - math.sqrt(1.0 - ct)) / (1.0 + k * d / r_rotor) ** 2 * (a_overlap / rotor_area)


def combine_deficits(deficits) -> float:
    """Aggregate deficits from several wakes: root-sum-square, capped at 1."""
    arr = np.asarray(list(deficits), dtype=float)
    if arr.size == 0:
        return 0.0
    if np.any(arr < 0) or np.any(arr > 1):
        raise ValueError("individual deficits must lie in [0, 1]")
    return min(1.0, float(np.sqrt(np.sum(arr**2))))


def waked_speed_table(layout, spec: TurbineSpec, k: float, thetas, v_grid) -> np.ndarray:
    """Waked hub-height speeds for every (direction, turbine, free speed).

    Returns an (S, n, G) array for S compass directions and a G-point
    free-stream speed grid, indexed by original turbine position. Lanes
    are independent; within a lane turbines are processed from upwind to
    downwind, each thrust coefficient evaluated at the already-waked
    speed of its upstream machine while the deficit scales the free
    stream.
    """
    pts = as_layout(layout)
    n = pts.shape[0]
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    grid = np.atleast_1d(np.asarray(v_grid, dtype=float))
    if np.any(grid < 0):
        raise ValueError("free-stream speeds must be non-negative")
    if k <= 0:
        raise ValueError("decay factor must be positive")
    n_lanes, n_grid = thetas.size, grid.size

    rad = np.deg2rad(thetas)
    c, s = np.cos(rad)[:, None], np.sin(rad)[:, None]
    xp = pts[:, 0][None, :] * c - pts[:, 1][None, :] * s
    yp = pts[:, 0][None, :] * s + pts[:, 1][None, :] * c
    order = np.argsort(-yp, axis=1, kind="stable")
    xs = np.take_along_axis(xp, order, axis=1)
    ys = np.take_along_axis(yp, order, axis=1)

    r_rotor = spec.rotor_radius
    rotor_area = spec.rotor_area
    # d[l, a, b]: how far rank b sits upwind of rank a; positive means b
    # is strictly upstream, which is the only case that contributes.
    d = ys[:, None, :] - ys[:, :, None]
    lateral = np.abs(xs[:, None, :] - xs[:, :, None])
    upstream = d > 0.0
    dg = np.where(upstream, d, 1.0)
    r_wake = r_rotor + k * dg
    shared = _overlap_area_arr(lateral, r_wake, r_rotor)
    geom = np.where(upstream, (shared / rotor_area) / (1.0 + k * dg / r_rotor) ** 2, 0.0)

    speeds = np.empty((n_lanes, n, n_grid))
    speeds[:, 0, :] = grid[None, :]
    for a in range(1, n):
        ct = thrust_coefficient(spec, speeds[:, :a, :])
        terms = (1.0 - np.sqrt(1.0 - ct)) * geom[:, a, :a, None]
        deficit = np.minimum(np.sqrt((terms**2).sum(axis=1)), 1.0)
        speeds[:, a, :] = grid[None, :] * (1.0 - deficit)

    inverse = np.argsort(order, axis=1)
    return np.take_along_axis(speeds, inverse[:, :, None], axis=1)


def farm_velocities(layout, spec: TurbineSpec, k: float, theta: float, v: float) -> np.ndarray:
    """Waked hub-height speed at every turbine for one direction and one
    free-stream speed, in original turbine order. All values lie in [0, v]."""
    if v < 0:
        raise ValueError("free-stream speed must be non-negative")
    table = waked_speed_table(layout, spec, k, [theta], [v])
    return table[0, :, 0].copy()
