"""Random feasible, well-spread seed layouts.

A seed is built in four steps: draw uniform points on the reference
square (-1, 1)^2, map them onto the farm quadrilateral with a bilinear
map, triangulate them, and solve a small NLP that maximizes the sum of
triangle areas under the spacing and containment constraints (the
"widespread" step). Maximizing covered area pushes the points apart
until they span the site, which simultaneously repairs any spacing
violations in the raw draw and hands the energy optimizer a feasible,
spread-out start. When even the spreading NLP cannot reach feasibility
after a retry budget, the turbine count does not fit the site.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    FarmBoundary,
    as_layout,
    containment_margins,
    is_feasible,
    min_distance_margins,
)
from .solver import NlpProblem, SolverOptions, maximize, vectorized_constraints

# Smallest triangle area (m^2) kept strictly positive during the
# widespread solve; negligible next to km^2-scale farm areas but enough
# to keep the triangulation from folding over itself.
MIN_TRIANGLE_AREA = 1.0

# Resample budget before a turbine count is declared infeasible.
DEFAULT_MAX_RETRIES = 20

# Relative slack on the in-circumcircle predicate; cocircular points
# count as outside, so degenerate quads keep one diagonal or the other.
_PREDICATE_TOL = 1e-12


class ResampleNeeded(RuntimeError):
    """The widespread solve failed to produce a feasible spread."""


class SeedingInfeasible(RuntimeError):
    """No feasible seed layout found within the retry budget."""

    def __init__(self, n_t: int, attempts: int) -> None:
        super().__init__(f"no feasible layout of {n_t} turbines found in {attempts} attempts")
        self.n_t = n_t
        self.attempts = attempts


@dataclass(frozen=True)
class Triangulation:
    """A triangulation of planar points; triangles are index triples.

    Every triangle is stored counterclockwise, no undirected edge belongs
    to more than two triangles, and every point is referenced.
    """

    points: np.ndarray
    triangles: np.ndarray

    def __post_init__(self) -> None:
        pts = as_layout(self.points)
        tris = np.asarray(self.triangles, dtype=int)
        if tris.ndim != 2 or tris.shape[1] != 3 or tris.shape[0] < 1:
            raise ValueError("triangles must be a nonempty (t, 3) index array")
        n = pts.shape[0]
        if tris.min() < 0 or tris.max() >= n:
            raise ValueError("triangle indices out of range")
        if np.any(triangle_areas(pts, tris) <= 0.0):
            raise ValueError("all triangles must be counterclockwise with positive area")
        edges: dict[tuple[int, int], int] = {}
        for a, b, c in tris:
            for u, v in ((a, b), (b, c), (c, a)):
                key = (min(u, v), max(u, v))
                edges[key] = edges.get(key, 0) + 1
        if any(count > 2 for count in edges.values()):
            raise ValueError("an edge is shared by more than two triangles")
        if set(np.unique(tris)) != set(range(n)):
            raise ValueError("every point must appear in some triangle")
        object.__setattr__(self, "points", pts.copy())
        object.__setattr__(self, "triangles", tris.copy())


def triangle_areas(points, triangles) -> np.ndarray:
    """Signed area of each index-triple triangle (positive when CCW)."""
    pts = as_layout(points)
    tris = np.asarray(triangles, dtype=int)
    a, b, c = pts[tris[:, 0]], pts[tris[:, 1]], pts[tris[:, 2]]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))


def sample_unit_square(n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. uniform points on the open square (-1, 1) x (-1, 1)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    out = rng.uniform(-1.0, 1.0, size=(n, 2))
    # uniform() is half-open at the top, so only -1.0 can occur; redraw it.
    on_edge = out == -1.0
    while np.any(on_edge):
        out[on_edge] = rng.uniform(-1.0, 1.0, size=int(on_edge.sum()))
        on_edge = out == -1.0
    return out


def bilinear_map(xi, eta, boundary: FarmBoundary) -> np.ndarray:
    """Map reference coordinates (xi, eta) in [-1, 1]^2 onto the site.

    Uses the four corner shape functions N_l, so (-1, -1) lands on corner
    1, (+1, -1) on corner 2, and so on counterclockwise; the functions
    sum to one everywhere, hence the image is the quadrilateral itself.
    Scalar inputs give one (2,) point, arrays give an (n, 2) layout.
    """
    xi_a = np.asarray(xi, dtype=float)
    eta_a = np.asarray(eta, dtype=float)
    scalar = xi_a.ndim == 0 and eta_a.ndim == 0
    xi_a, eta_a = np.atleast_1d(xi_a), np.atleast_1d(eta_a)
    shapes = 0.25 * np.stack(
        [
            (1.0 - xi_a) * (1.0 - eta_a),
            (1.0 + xi_a) * (1.0 - eta_a),
            (1.0 + xi_a) * (1.0 + eta_a),
            (1.0 - xi_a) * (1.0 + eta_a),
        ],
        axis=1,
    )
    mapped = shapes @ boundary.corners
    return mapped[0] if scalar else mapped


def _circumcircle_contains(a, b, c, p) -> bool:
    # Strict in-circumcircle predicate for CCW (a, b, c), with a relative
    # tolerance built from the same products that form the determinant.
    ax, ay = a[0] - p[0], a[1] - p[1]
    bx, by = b[0] - p[0], b[1] - p[1]
    cx, cy = c[0] - p[0], c[1] - p[1]
    a2 = ax * ax + ay * ay
    b2 = bx * bx + by * by
    c2 = cx * cx + cy * cy
    det = ax * (by * c2 - cy * b2) - ay * (bx * c2 - cx * b2) + a2 * (bx * cy - cx * by)
    mag = (
        abs(ax) * (abs(by) * c2 + abs(cy) * b2)
        + abs(ay) * (abs(bx) * c2 + abs(cx) * b2)
        + a2 * (abs(bx) * abs(cy) + abs(cx) * abs(by))
    )
    return det > _PREDICATE_TOL * mag


def delaunay(points) -> Triangulation:
    """Delaunay triangulation by incremental insertion (Bowyer-Watson).

    Points are inserted one at a time into a super-triangle; each
    insertion removes the triangles whose circumcircle contains the new
    point and re-triangulates the cavity boundary. Needs at least three
    points, not all collinear.
    """
    pts = as_layout(points)
    n = pts.shape[0]
    if n < 3:
        raise ValueError("triangulation needs at least 3 points")
    span = float(np.ptp(pts, axis=0).max())
    if span == 0.0:
        raise ValueError("all points coincide")
    diffs = pts[:, None, :] - pts[None, :, :]
    if np.any((np.abs(diffs).sum(axis=2) == 0.0) & ~np.eye(n, dtype=bool)):
        raise ValueError("duplicate points cannot be triangulated")
    anchor = pts[0]
    far = int(np.argmax(((pts - anchor) ** 2).sum(axis=1)))
    cross = (pts[far, 0] - anchor[0]) * (pts[:, 1] - anchor[1]) - (pts[far, 1] - anchor[1]) * (
        pts[:, 0] - anchor[0]
    )
    if np.max(np.abs(cross)) <= 1e-12 * span * span:
        raise ValueError("points are collinear; no triangulation exists")

    mid = 0.5 * (pts.min(axis=0) + pts.max(axis=0))
    big = 20.0 * span
    extended = np.vstack(
        [
            pts,
            [mid[0] - big, mid[1] - 0.5 * big],
            [mid[0] + big, mid[1] - 0.5 * big],
            [mid[0], mid[1] + big],
        ]
    )
    triangles: set[tuple[int, int, int]] = {(n, n + 1, n + 2)}

    for i in range(n):
        p = extended[i]
        bad = [
            t
            for t in triangles
            if _circumcircle_contains(extended[t[0]], extended[t[1]], extended[t[2]], p)
        ]
        if not bad:
            raise ValueError("degenerate configuration during triangulation")
        directed = set()
        for a, b, c in bad:
            directed.update(((a, b), (b, c), (c, a)))
        triangles.difference_update(bad)
        for a, b in directed:
            if (b, a) in directed:
                continue  # interior edge of the cavity
            # The cavity is star-shaped around p, so (a, b, i) stays CCW.
            area2 = (extended[b, 0] - extended[a, 0]) * (extended[i, 1] - extended[a, 1]) - (
                extended[b, 1] - extended[a, 1]
            ) * (extended[i, 0] - extended[a, 0])
            if area2 <= 0.0:
                raise ValueError("degenerate (collinear) points in triangulation")
            triangles.add((a, b, i))

    kept = [t for t in triangles if max(t) < n]
    canonical = []
    for a, b, c in kept:
        if a <= b and a <= c:
            canonical.append((a, b, c))
        elif b <= a and b <= c:
            canonical.append((b, c, a))
        else:
            canonical.append((c, a, b))
    canonical.sort()
    return Triangulation(points=pts, triangles=np.array(canonical, dtype=int))


def _scaled_site(boundary: FarmBoundary, d_min: float) -> FarmBoundary:
    return FarmBoundary(boundary.corners / d_min)


def _check_spread(layout: np.ndarray, boundary: FarmBoundary, d_min: float) -> np.ndarray:
    report = is_feasible(layout, boundary, d_min, tol=0.0)
    if not report.feasible:
        raise ResampleNeeded(
            f"spread solve left {report.constraint} at margin {report.worst_margin:.3e}"
        )
    return layout


def widespread(
    points,
    boundary: FarmBoundary,
    d_min: float,
    eps_area: float = MIN_TRIANGLE_AREA,
    options: SolverOptions | None = None,
) -> np.ndarray:
    """Spread points across the site by maximizing total triangle area.

    The triangulation topology is frozen from the initial Delaunay run;
    the NLP then maximizes the sum of triangle areas subject to pairwise
    spacing, containment, and a positive floor on every triangle area.
    Constraints carry a small slack above the solver's feasibility
    tolerance so the returned layout is strictly feasible. Raises
    ResampleNeeded when the solve cannot reach feasibility, which callers
    treat as "draw a fresh sample".
    """
    pts = as_layout(points)
    n = pts.shape[0]
    if n < 3:
        raise ValueError("widespread needs at least 3 points")
    if d_min <= 0 or eps_area <= 0:
        raise ValueError("d_min and eps_area must be positive")
    options = options or SolverOptions(max_iter=spread_iteration_cap(n))
    try:
        tris = delaunay(pts).triangles
    except ValueError as exc:
        raise ResampleNeeded(f"degenerate sample: {exc}") from exc

    # Solve in units of d_min so spacing margins, containment margins and
    # gradients all sit at order one.
    site = _scaled_site(boundary, d_min)
    eps_scaled = eps_area / d_min**2
    slack = 2.0 * options.feas_tol
    iu, ju = np.triu_indices(n, k=1)
    n_pairs = iu.size
    ta, tb, tc = tris[:, 0], tris[:, 1], tris[:, 2]
    n_tris = tris.shape[0]
    m = n_pairs + 4 * n + n_tris

    def objective(u: np.ndarray) -> float:
        return float(triangle_areas(u.reshape(n, 2), tris).sum())

    def gradient(u: np.ndarray) -> np.ndarray:
        q = u.reshape(n, 2)
        grad = np.zeros((n, 2))
        np.add.at(grad[:, 0], ta, 0.5 * (q[tb, 1] - q[tc, 1]))
        np.add.at(grad[:, 1], ta, 0.5 * (q[tc, 0] - q[tb, 0]))
        np.add.at(grad[:, 0], tb, 0.5 * (q[tc, 1] - q[ta, 1]))
        np.add.at(grad[:, 1], tb, 0.5 * (q[ta, 0] - q[tc, 0]))
        np.add.at(grad[:, 0], tc, 0.5 * (q[ta, 1] - q[tb, 1]))
        np.add.at(grad[:, 1], tc, 0.5 * (q[tb, 0] - q[ta, 0]))
        return grad.ravel()

    def constraint_values(u: np.ndarray) -> np.ndarray:
        q = u.reshape(n, 2)
        return (
            np.concatenate(
                [
                    min_distance_margins(q, 1.0),
                    containment_margins(q, site),
                    triangle_areas(q, tris) - eps_scaled,
                ]
            )
            - slack
        )

    # Containment gradients are constants of the site geometry.
    jac_template = np.zeros((m, 2 * n))
    edge_pairs = site.edge_pairs
    gx = edge_pairs[:, 0, 1] - edge_pairs[:, 1, 1]
    gy = edge_pairs[:, 1, 0] - edge_pairs[:, 0, 0]
    for t in range(n):
        rows = n_pairs + 4 * t + np.arange(4)
        jac_template[rows, 2 * t] = gx
        jac_template[rows, 2 * t + 1] = gy

    def constraint_jacobian(u: np.ndarray) -> np.ndarray:
        q = u.reshape(n, 2)
        jac = jac_template.copy()
        rows = np.arange(n_pairs)
        diff = 2.0 * (q[iu] - q[ju])
        jac[rows, 2 * iu] = diff[:, 0]
        jac[rows, 2 * iu + 1] = diff[:, 1]
        jac[rows, 2 * ju] = -diff[:, 0]
        jac[rows, 2 * ju + 1] = -diff[:, 1]
        rows = n_pairs + 4 * n + np.arange(n_tris)
        jac[rows, 2 * ta] = 0.5 * (q[tb, 1] - q[tc, 1])
        jac[rows, 2 * ta + 1] = 0.5 * (q[tc, 0] - q[tb, 0])
        jac[rows, 2 * tb] = 0.5 * (q[tc, 1] - q[ta, 1])
        jac[rows, 2 * tb + 1] = 0.5 * (q[ta, 0] - q[tc, 0])
        jac[rows, 2 * tc] = 0.5 * (q[ta, 1] - q[tb, 1])
        jac[rows, 2 * tc + 1] = 0.5 * (q[tb, 0] - q[ta, 0])
        return jac

    constraints, constraint_gradients = vectorized_constraints(
        constraint_values, constraint_jacobian, m
    )
    problem = NlpProblem(
        dimension=2 * n,
        objective=objective,
        constraints=constraints,
        gradient=gradient,
        constraint_gradients=constraint_gradients,
    )
    result = maximize(problem, (pts / d_min).ravel(), options)
    return _check_spread(result.x.reshape(n, 2) * d_min, boundary, d_min)


def spread_iteration_cap(n: int) -> int:
    """Default widespread iteration budget, growing with point count."""
    return 300 + 40 * n


def _spread_pair(
    pts: np.ndarray, boundary: FarmBoundary, d_min: float, options: SolverOptions | None
) -> np.ndarray:
    # Two points carry no triangles; maximize their squared separation
    # under the same containment and spacing constraints instead.
    options = options or SolverOptions(max_iter=spread_iteration_cap(2))
    site = _scaled_site(boundary, d_min)
    slack = 2.0 * options.feas_tol

    def objective(u: np.ndarray) -> float:
        return float((u[0] - u[2]) ** 2 + (u[1] - u[3]) ** 2)

    def gradient(u: np.ndarray) -> np.ndarray:
        dx, dy = u[0] - u[2], u[1] - u[3]
        return np.array([2 * dx, 2 * dy, -2 * dx, -2 * dy])

    def constraint_values(u: np.ndarray) -> np.ndarray:
        q = u.reshape(2, 2)
        return (
            np.concatenate([min_distance_margins(q, 1.0), containment_margins(q, site)]) - slack
        )

    def constraint_jacobian(u: np.ndarray) -> np.ndarray:
        q = u.reshape(2, 2)
        jac = np.zeros((9, 4))
        diff = 2.0 * (q[0] - q[1])
        jac[0] = [diff[0], diff[1], -diff[0], -diff[1]]
        edge_pairs = site.edge_pairs
        gx = edge_pairs[:, 0, 1] - edge_pairs[:, 1, 1]
        gy = edge_pairs[:, 1, 0] - edge_pairs[:, 0, 0]
        jac[1:5, 0] = gx
        jac[1:5, 1] = gy
        jac[5:9, 2] = gx
        jac[5:9, 3] = gy
        return jac

    constraints, constraint_gradients = vectorized_constraints(
        constraint_values, constraint_jacobian, 9
    )
    problem = NlpProblem(
        dimension=4,
        objective=objective,
        constraints=constraints,
        gradient=gradient,
        constraint_gradients=constraint_gradients,
    )
    result = maximize(problem, (pts / d_min).ravel(), options)
    return _check_spread(result.x.reshape(2, 2) * d_min, boundary, d_min)


def seed_layout(
    n_t: int,
    boundary: FarmBoundary,
    d_min: float,
    rng: np.random.Generator,
    max_retries: int = DEFAULT_MAX_RETRIES,
    options: SolverOptions | None = None,
) -> np.ndarray:
    """Produce one random feasible, well-spread layout of n_t turbines.

    Composes sample -> bilinear map -> Delaunay -> widespread, redrawing
    the sample whenever the spread solve fails, up to max_retries times.
    The rng fully determines the outcome. Raises SeedingInfeasible when
    every attempt fails, the signal that n_t turbines do not fit the
    site at spacing d_min.
    """
    if n_t < 1:
        raise ValueError("n_t must be at least 1")
    if max_retries < 1:
        raise ValueError("max_retries must be at least 1")
    if d_min <= 0:
        raise ValueError("d_min must be positive")
    for _ in range(max_retries):
        ref = sample_unit_square(n_t, rng)
        pts = bilinear_map(ref[:, 0], ref[:, 1], boundary)
        if n_t == 1:
            return pts
        try:
            if n_t == 2:
                return _spread_pair(pts, boundary, d_min, options)
            return widespread(pts, boundary, d_min, options=options)
        except ResampleNeeded:
            continue
    raise SeedingInfeasible(n_t, max_retries)
