"""Multistart layout optimization and the experiment harnesses built on it.

One run draws M independent random seed layouts, improves each with a
coarse constrained solve of expected energy, keeps the best end point,
and polishes it once with tighter tolerances and the fine quadrature
step. Restarts are pure functions of (base seed, restart index), so the
outcome is identical whether they execute serially or on a worker pool.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from multiprocessing import get_context
from typing import Iterable, Iterator, Sequence

import numpy as np

from .aep import DEFAULT_DV, AepBreakdown, expected_aep
from .geometry import FarmBoundary, as_layout, containment_margins, is_feasible, min_distance_margins
from .seeding import DEFAULT_MAX_RETRIES, SeedingInfeasible, bilinear_map, seed_layout
from .solver import NlpProblem, NlpResult, SolverOptions, maximize, vectorized_constraints
from .turbine import TurbineSpec
from .wake import decay_factor
from .wind_resource import WindRose

# Minimum turbine separation in rotor diameters.
SPACING_DIAMETERS = 4.0


def minimum_distance(spec: TurbineSpec) -> float:
    """Required center-to-center spacing in meters for this turbine."""
    return SPACING_DIAMETERS * spec.rotor_diameter


@dataclass(frozen=True)
class RunConfig:
    """Knobs for one multistart run.

    restarts is the number of independent seeds M; stall_limit stops the
    ordered reduction once the best result has not improved for that many
    consecutive restarts (0 runs all of them). dv is the quadrature step
    used for reported energies and the polish solve, coarse_dv the
    cheaper step for the per-restart coarse solves. seed_retries bounds
    the resampling loop inside each seeding call.
    """

    restarts: int = 20
    stall_limit: int = 0
    seed: int = 0
    worker_count: int = 1
    dv: float = DEFAULT_DV
    coarse_dv: float = 0.5
    coarse: SolverOptions = field(default_factory=SolverOptions)
    polish: SolverOptions = field(default_factory=lambda: SolverOptions(mode="polish"))
    seed_retries: int = DEFAULT_MAX_RETRIES

    def __post_init__(self) -> None:
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.stall_limit < 0:
            raise ValueError("stall_limit must be nonnegative")
        if self.worker_count < 1:
            raise ValueError("worker_count must be at least 1")
        if self.dv <= 0 or self.coarse_dv <= 0:
            raise ValueError("quadrature steps must be positive")
        if self.seed_retries < 1:
            raise ValueError("seed_retries must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")


@dataclass(frozen=True)
class RestartRecord:
    """Audit record of one restart; layouts are None when seeding failed."""

    index: int
    start_aep: float
    end_aep: float
    status: str
    layout: np.ndarray | None
    start_layout: np.ndarray | None


@dataclass(frozen=True)
class OptimizationOutcome:
    """Result of a multistart run.

    All fields except wall_time are deterministic functions of the
    inputs and config (worker_count included only for scheduling).
    """

    best_layout: np.ndarray
    best_aep: AepBreakdown
    kkt: NlpResult
    best_index: int
    restarts_run: int
    per_restart: tuple[RestartRecord, ...]
    wall_time: float


def restart_rng(seed: int, index: int) -> np.random.Generator:
    """The rng stream owned by one restart: Philox keyed by (seed, index).

    Philox is counter-based with a fixed algorithm, so streams are
    platform-stable and independent across indices.
    """
    return np.random.Generator(np.random.Philox(key=np.array([seed, index], dtype=np.uint64)))


def layout_problem(
    boundary: FarmBoundary,
    spec: TurbineSpec,
    rose: WindRose,
    n_t: int,
    dv: float,
) -> NlpProblem:
    """The energy-maximization NLP over 2·n_t turbine coordinates.

    Objective is farm AEP in GWh at quadrature step dv; gradients are
    left to the solver's central differences (1 m default step).
    Constraints are the pairwise spacing margins and the containment
    margins, both scaled to order one as in is_feasible.
    """
    d_min = minimum_distance(spec)
    k = decay_factor(spec.hub_height, rose.z0)
    n_pairs = n_t * (n_t - 1) // 2
    m = n_pairs + 4 * n_t
    iu, ju = np.triu_indices(n_t, k=1)

    def objective(u: np.ndarray) -> float:
        return expected_aep(u.reshape(n_t, 2), spec, rose, k, dv).total

    def constraint_values(u: np.ndarray) -> np.ndarray:
        pts = u.reshape(n_t, 2)
        cont = containment_margins(pts, boundary) / d_min**2
        if n_pairs == 0:
            return cont
        return np.concatenate([min_distance_margins(pts, d_min), cont])

    edge_pairs = boundary.edge_pairs
    gx = (edge_pairs[:, 0, 1] - edge_pairs[:, 1, 1]) / d_min**2
    gy = (edge_pairs[:, 1, 0] - edge_pairs[:, 0, 0]) / d_min**2
    jac_template = np.zeros((m, 2 * n_t))
    for t in range(n_t):
        rows = n_pairs + 4 * t + np.arange(4)
        jac_template[rows, 2 * t] = gx
        jac_template[rows, 2 * t + 1] = gy

    def constraint_jacobian(u: np.ndarray) -> np.ndarray:
        jac = jac_template.copy()
        if n_pairs:
            pts = u.reshape(n_t, 2)
            rows = np.arange(n_pairs)
            diff = 2.0 * (pts[iu] - pts[ju]) / d_min**2
            jac[rows, 2 * iu] = diff[:, 0]
            jac[rows, 2 * iu + 1] = diff[:, 1]
            jac[rows, 2 * ju] = -diff[:, 0]
            jac[rows, 2 * ju + 1] = -diff[:, 1]
        return jac

    constraints, constraint_gradients = vectorized_constraints(constraint_values, constraint_jacobian, m)
    return NlpProblem(
        dimension=2 * n_t,
        objective=objective,
        constraints=constraints,
        constraint_gradients=constraint_gradients,
    )


def _run_restart(args: tuple) -> RestartRecord:
    index, boundary, spec, rose, n_t, config = args
    d_min = minimum_distance(spec)
    k = decay_factor(spec.hub_height, rose.z0)
    rng = restart_rng(config.seed, index)
    try:
        seed_pts = seed_layout(n_t, boundary, d_min, rng, config.seed_retries)
    except SeedingInfeasible:
        return RestartRecord(index, float("nan"), float("nan"), "seeding-infeasible", None, None)
    start_aep = expected_aep(seed_pts, spec, rose, k, config.dv).total
    problem = layout_problem(boundary, spec, rose, n_t, config.coarse_dv)
    result = maximize(problem, seed_pts.ravel(), config.coarse)
    layout = result.x.reshape(n_t, 2)
    end_aep = expected_aep(layout, spec, rose, k, config.dv).total
    return RestartRecord(index, start_aep, end_aep, result.status, layout, seed_pts)


def _reduce_records(records: Iterator[RestartRecord], config: RunConfig) -> tuple[list[RestartRecord], RestartRecord | None]:
    """Ordered best-of reduction with the stall rule.

    Consumes records in restart-index order; returns the records actually
    considered and the best among them. Identical for any worker count
    because it never looks at completion order.
    """
    used: list[RestartRecord] = []
    best: RestartRecord | None = None
    since_improvement = 0
    for record in records:
        used.append(record)
        improved = record.layout is not None and (best is None or record.end_aep > best.end_aep)
        if improved:
            best = record
            since_improvement = 0
        else:
            since_improvement += 1
        if config.stall_limit and best is not None and since_improvement >= config.stall_limit:
            break
    return used, best


def optimize_layout(
    boundary: FarmBoundary,
    spec: TurbineSpec,
    rose: WindRose,
    n_t: int,
    config: RunConfig | None = None,
) -> OptimizationOutcome:
    """Best layout of n_t turbines from a multistart seeded search.

    Runs config.restarts independent (seed -> coarse solve) restarts,
    selects the best end energy in restart-index order subject to the
    stall rule, then polishes the winner at the reporting quadrature
    step. Raises SeedingInfeasible when every restart's seeding failed,
    the signal that n_t turbines do not fit the site.
    """
    config = config or RunConfig()
    if n_t < 1:
        raise ValueError("n_t must be at least 1")
    start_time = time.perf_counter()
    tasks = [(r, boundary, spec, rose, n_t, config) for r in range(config.restarts)]
    if config.worker_count == 1:
        used, best = _reduce_records((_run_restart(t) for t in tasks), config)
    else:
        with ProcessPoolExecutor(
            max_workers=config.worker_count, mp_context=get_context("spawn")
        ) as pool:
            used, best = _reduce_records(iter(list(pool.map(_run_restart, tasks))), config)
    if best is None:
        raise SeedingInfeasible(n_t, len(used) * config.seed_retries)

    problem = layout_problem(boundary, spec, rose, n_t, config.dv)
    polished = maximize(problem, best.layout.ravel(), config.polish)
    best_layout = polished.x.reshape(n_t, 2)
    k = decay_factor(spec.hub_height, rose.z0)
    best_aep = expected_aep(best_layout, spec, rose, k, config.dv)
    return OptimizationOutcome(
        best_layout=best_layout,
        best_aep=best_aep,
        kkt=polished,
        best_index=best.index,
        restarts_run=len(used),
        per_restart=tuple(used),
        wall_time=time.perf_counter() - start_time,
    )


def grid_layout(boundary: FarmBoundary, n_t: int) -> np.ndarray:
    """Reference grid of n_t points aligned with the boundary edges.

    Rows and columns are evenly spaced lattice lines of the reference
    square mapped through the bilinear map; corner points land exactly on
    the boundary corners. The column count is chosen to maximize the
    smaller of the two reference-edge spacings, which keeps the baseline
    feasible whenever any full grid is.
    """
    if n_t < 1:
        raise ValueError("n_t must be at least 1")
    corners = boundary.corners
    width = float(np.linalg.norm(corners[1] - corners[0]))
    height = float(np.linalg.norm(corners[3] - corners[0]))

    def spacing(cols: int, rows: int) -> float:
        sx = width / (cols - 1) if cols > 1 else math.inf
        sy = height / (rows - 1) if rows > 1 else math.inf
        return min(sx, sy)

    candidates = []
    for cols in range(1, n_t + 1):
        rows = math.ceil(n_t / cols)
        candidates.append((spacing(cols, rows), -abs(cols * height - rows * width), cols, rows))
    _, _, cols, rows = max(candidates)
    xi = np.linspace(-1.0, 1.0, cols) if cols > 1 else np.array([0.0])
    eta = np.linspace(-1.0, 1.0, rows) if rows > 1 else np.array([0.0])
    xi_grid, eta_grid = np.meshgrid(xi, eta)
    layout = bilinear_map(xi_grid.ravel()[:n_t], eta_grid.ravel()[:n_t], boundary)
    return as_layout(layout)


def rms_distance(layout) -> float:
    """Root mean square of all pairwise turbine distances (nan for n < 2)."""
    pts = as_layout(layout)
    n = pts.shape[0]
    if n < 2:
        return float("nan")
    iu, ju = np.triu_indices(n, k=1)
    sq = ((pts[iu] - pts[ju]) ** 2).sum(axis=1)
    return float(np.sqrt(sq.mean()))


@dataclass(frozen=True)
class SweepRow:
    """One saturation-sweep result; energies are nan when infeasible."""

    n_t: int
    feasible: bool
    best_aep: float
    efficiency: float
    rms_distance: float


def saturation_sweep(
    boundary: FarmBoundary,
    spec: TurbineSpec,
    rose: WindRose,
    n_range: Sequence[int],
    config: RunConfig | None = None,
) -> list[SweepRow]:
    """Optimize each turbine count in n_range and tabulate the outcomes.

    Efficiency is energy with wakes over wake-free energy in percent.
    Counts whose seeding never succeeds are reported infeasible rather
    than raised, matching how site saturation shows up in practice.
    """
    if len(n_range) == 0:
        raise ValueError("n_range must be nonempty")
    if list(n_range) != sorted(set(int(n) for n in n_range)):
        raise ValueError("n_range must be strictly ascending")
    rows = []
    for n_t in n_range:
        try:
            outcome = optimize_layout(boundary, spec, rose, int(n_t), config)
        except SeedingInfeasible:
            rows.append(SweepRow(int(n_t), False, float("nan"), float("nan"), float("nan")))
            continue
        breakdown = outcome.best_aep
        rows.append(
            SweepRow(
                n_t=int(n_t),
                feasible=True,
                best_aep=breakdown.total,
                efficiency=100.0 - breakdown.wake_loss_total,
                rms_distance=rms_distance(outcome.best_layout),
            )
        )
    return rows


@dataclass(frozen=True)
class SensitivityRow:
    """Grid-versus-optimized comparison under one rose rotation."""

    angle: float
    grid_aep: float
    grid_loss: float
    optimized_aep: float
    optimized_loss: float


def rose_rotation_sensitivity(
    boundary: FarmBoundary,
    spec: TurbineSpec,
    rose: WindRose,
    n_t: int,
    angles: Iterable[float],
    config: RunConfig | None = None,
) -> list[SensitivityRow]:
    """Re-optimize under rotated roses and compare with the fixed grid.

    Each angle rotates every sector's direction; the grid layout stays
    put, so its energy shifts with the rose while the optimizer adapts.
    """
    k = decay_factor(spec.hub_height, rose.z0)
    grid = grid_layout(boundary, n_t)
    resolved = config or RunConfig()
    rows = []
    for angle in angles:
        if not math.isfinite(angle):
            raise ValueError("angles must be finite")
        rotated = rose.rotated(float(angle))
        grid_breakdown = expected_aep(grid, spec, rotated, k, resolved.dv)
        outcome = optimize_layout(boundary, spec, rotated, n_t, resolved)
        rows.append(
            SensitivityRow(
                angle=float(angle),
                grid_aep=grid_breakdown.total,
                grid_loss=grid_breakdown.wake_loss_total,
                optimized_aep=outcome.best_aep.total,
                optimized_loss=outcome.best_aep.wake_loss_total,
            )
        )
    return rows
