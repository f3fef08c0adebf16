"""Site boundary and placement constraints.

The admissible site is a strictly convex quadrilateral given by four
counterclockwise corners. A layout is feasible when every turbine pair
keeps a minimum separation and every turbine sits inside the
quadrilateral. Both conditions are expressed as inequality margins that
are non-negative exactly on the feasible set, which is also the form the
optimizer consumes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def as_layout(layout) -> np.ndarray:
    """Validate and return a layout as an (n, 2) float array."""
    arr = np.asarray(layout, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 1:
        raise ValueError("layout must be an (n, 2) array of coordinates")
    if not np.all(np.isfinite(arr)):
        raise ValueError("layout coordinates must be finite")
    return arr


@dataclass(frozen=True)
class FarmBoundary:
    """Strictly convex quadrilateral site, corners counterclockwise."""

    corners: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.corners, dtype=float)
        if c.shape != (4, 2):
            raise ValueError("boundary needs exactly 4 corners of 2 coordinates")
        if not np.all(np.isfinite(c)):
            raise ValueError("boundary corners must be finite")
        object.__setattr__(self, "corners", c)
        edges = np.roll(c, -1, axis=0) - c
        cross = edges[:, 0] * np.roll(edges, -1, axis=0)[:, 1] - edges[:, 1] * np.roll(edges, -1, axis=0)[:, 0]
        if np.all(cross < 0):
            raise ValueError("corners are ordered clockwise; list them counterclockwise")
        if np.any(cross == 0):
            raise ValueError("boundary is degenerate: collinear or repeated corners")
        if not np.all(cross > 0):
            raise ValueError("boundary must be convex")

    @property
    def area(self) -> float:
        """Enclosed area by the shoelace formula."""
        x, y = self.corners[:, 0], self.corners[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))

    @property
    def edge_pairs(self) -> np.ndarray:
        """(4, 2, 2) array of consecutive corner pairs, counterclockwise."""
        return np.stack([self.corners, np.roll(self.corners, -1, axis=0)], axis=1)


def pair_indices(n: int) -> list[tuple[int, int]]:
    """All turbine index pairs (i, j) with i < j, row-major order."""
    return [(i, j) for i in range(n - 1) for j in range(i + 1, n)]


def min_distance_margins(layout, d_min: float) -> np.ndarray:
    """Dimensionless separation margins, one per turbine pair (i < j).

    margin = ((xi - xj)^2 + (yi - yj)^2) / d_min^2 - 1, which is >= 0
    exactly when the pair is at least d_min apart. The squared form keeps
    the margin differentiable at coincident points.
    """
    pts = as_layout(layout)
    if d_min <= 0:
        raise ValueError("d_min must be positive")
    n = pts.shape[0]
    if n < 2:
        return np.empty(0)
    iu, ju = np.triu_indices(n, k=1)
    diff = pts[iu] - pts[ju]
    return (diff[:, 0] ** 2 + diff[:, 1] ** 2) / d_min**2 - 1.0


def containment_margins(layout, boundary: FarmBoundary) -> np.ndarray:
    """Signed containment determinants, turbine-major then edge.

    For turbine p and consecutive corners (cj, ck) the margin is

        det | px  py  1 |
            | cjx cjy 1 |
            | ckx cky 1 |

    twice the signed area of triangle (p, cj, ck); positive strictly
    inside the counterclockwise boundary, zero on edge cj-ck, negative
    beyond it. Units are m^2.
    """
    pts = as_layout(layout)
    pairs = boundary.edge_pairs
    cj, ck = pairs[:, 0, :], pairs[:, 1, :]
    x, y = pts[:, 0:1], pts[:, 1:2]
    det = (
        x * (cj[:, 1] - ck[:, 1])
        - y * (cj[:, 0] - ck[:, 0])
        + (cj[:, 0] * ck[:, 1] - ck[:, 0] * cj[:, 1])
    )
    return det.reshape(-1)


@dataclass(frozen=True)
class FeasibilityReport:
    """Feasibility verdict with the worst margin and its constraint."""

    feasible: bool
    worst_margin: float
    constraint: str


def is_feasible(layout, boundary: FarmBoundary, d_min: float, tol: float = 1e-6) -> FeasibilityReport:
    """Check all placement constraints at tolerance tol.

    Margins are compared in a common scale: separation margins are
    already dimensionless and containment determinants are divided by
    d_min^2. The report carries the minimum scaled margin and the name of
    the constraint attaining it.
    """
    pts = as_layout(layout)
    n = pts.shape[0]
    labels: list[str] = []
    values: list[float] = []

    dist = min_distance_margins(pts, d_min)
    for (i, j), m in zip(pair_indices(n), dist):
        labels.append(f"distance(turbine {i}, turbine {j})")
        values.append(float(m))

    cont = containment_margins(pts, boundary) / d_min**2
    for t in range(n):
        for e in range(4):
            labels.append(f"containment(turbine {t}, edge {e})")
            values.append(float(cont[4 * t + e]))

    worst = int(np.argmin(values))
    worst_margin = values[worst]
    return FeasibilityReport(worst_margin >= -tol, worst_margin, labels[worst])
