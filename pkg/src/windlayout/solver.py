"""Inequality-constrained maximization via an augmented Lagrangian.

The solver maximizes a smooth objective subject to g_k(x) >= 0. The
outer loop maintains multiplier estimates and a penalty weight; each
inner solve minimizes the augmented Lagrangian with a BFGS iteration and
a backtracking line search. Gradients default to central finite
differences, with analytic callbacks honoured when supplied. A first
phase drives constraint violation down when the start is infeasible.

Every evaluation is inspected and the best feasible point seen anywhere
(line-search probes included) is retained, so from a feasible start the
returned objective can only improve.
"""
from __future__ import annotations

import functools
import logging
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np
from scipy.optimize import nnls

logger = logging.getLogger(__name__)

Status = Literal["converged", "iteration-cap", "numerical-failure"]

# Constraints within this multiple of feas_tol of the boundary count as
# active when estimating KKT multipliers.
ACTIVITY_FACTOR = 10.0


@dataclass
class NlpProblem:
    """A maximization problem: objective f, inequalities g_k(x) >= 0.

    gradient and constraint_gradients are optional analytic derivatives;
    when absent, central finite differences with step fd_step are used.
    """

    dimension: int
    objective: Callable[[np.ndarray], float]
    constraints: list
    gradient: Callable[[np.ndarray], np.ndarray] | None = None
    constraint_gradients: list | None = None

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise ValueError("dimension must be at least 1")
        if self.constraint_gradients is not None and len(self.constraint_gradients) != len(
            self.constraints
        ):
            raise ValueError("need one gradient per constraint when supplied")


@dataclass
class SolverOptions:
    """Tolerances and budgets for maximize.

    mode picks defaults: "coarse" stops at kkt_tol 1e-3 / feas_tol 1e-6,
    "polish" at 1e-4 / 1e-7 with a larger iteration budget. Explicit
    values override the mode defaults. max_iter caps total inner
    iterations across all phases; fd_step is the central-difference step.
    rho0 is the starting penalty weight: coarse runs start soft (10) so
    early rounds can move freely, polish runs start stiff (1e4) because
    their start point is already near-feasible and a soft penalty would
    let the objective drag it back out of the feasible set.
    """

    mode: Literal["coarse", "polish"] = "coarse"
    kkt_tol: float = field(default=None)  # type: ignore[assignment]
    feas_tol: float = field(default=None)  # type: ignore[assignment]
    max_iter: int = field(default=None)  # type: ignore[assignment]
    fd_step: float = 1.0
    rho0: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        polish = self.mode == "polish"
        if self.kkt_tol is None:
            self.kkt_tol = 1e-4 if polish else 1e-3
        if self.feas_tol is None:
            self.feas_tol = 1e-7 if polish else 1e-6
        if self.max_iter is None:
            self.max_iter = 1200 if polish else 250
        if self.rho0 is None:
            self.rho0 = 1e4 if polish else 10.0
        if self.kkt_tol <= 0 or self.feas_tol <= 0 or self.max_iter < 1 or self.fd_step <= 0:
            raise ValueError("tolerances, budgets and steps must be positive")
        if self.rho0 <= 0:
            raise ValueError("the starting penalty weight must be positive")


@dataclass(frozen=True)
class NlpResult:
    """Outcome of one maximize call."""

    x: np.ndarray
    objective_value: float
    status: Status
    kkt_residual: float
    max_violation: float
    iterations: int


def fd_gradient(f: Callable[[np.ndarray], float], x, h=1.0) -> np.ndarray:
    """Central-difference gradient of f at x with step h (scalar or per
    coordinate)."""
    xa = np.asarray(x, dtype=float)
    steps = np.broadcast_to(np.asarray(h, dtype=float), xa.shape).copy()
    if np.any(steps <= 0):
        raise ValueError("finite-difference steps must be positive")
    grad = np.empty_like(xa)
    for i in range(xa.size):
        e = np.zeros_like(xa)
        e[i] = steps[i]
        grad[i] = (f(xa + e) - f(xa - e)) / (2.0 * steps[i])
    return grad


def vectorized_constraints(
    values: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    m: int,
) -> tuple[list, list]:
    """Adapt vector-valued constraint callbacks to per-constraint callables.

    values(x) must return the (m,) array of all constraint values and
    jacobian(x) the (m, n) array of their gradients. The last evaluation
    of each is cached on the point's bytes, so the m callables this
    returns cost one vector evaluation per distinct x instead of m.
    Returns (constraints, constraint_gradients) ready for NlpProblem.
    """
    if m < 1:
        raise ValueError("need at least one constraint")
    value_cache: dict = {"key": None, "out": None}
    jac_cache: dict = {"key": None, "out": None}

    def values_at(x: np.ndarray) -> np.ndarray:
        key = x.tobytes()
        if value_cache["key"] != key:
            out = np.asarray(values(x), dtype=float)
            if out.shape != (m,):
                raise ValueError(f"constraint vector has shape {out.shape}, expected ({m},)")
            value_cache["key"] = key
            value_cache["out"] = out
        return value_cache["out"]

    def jacobian_at(x: np.ndarray) -> np.ndarray:
        key = x.tobytes()
        if jac_cache["key"] != key:
            jac_cache["key"] = key
            jac_cache["out"] = np.asarray(jacobian(x), dtype=float)
        return jac_cache["out"]

    constraints = [lambda x, i=i: float(values_at(np.asarray(x, dtype=float))[i]) for i in range(m)]
    gradients = [lambda x, i=i: jacobian_at(np.asarray(x, dtype=float))[i] for i in range(m)]
    return constraints, gradients


def _constraint_values(problem: NlpProblem, x: np.ndarray) -> np.ndarray:
    if not problem.constraints:
        return np.empty(0)
    return np.array([g(x) for g in problem.constraints], dtype=float)


def _objective_gradient(problem: NlpProblem, x: np.ndarray, h: float) -> np.ndarray:
    if problem.gradient is not None:
        return np.asarray(problem.gradient(x), dtype=float)
    return fd_gradient(problem.objective, x, h)


def _constraint_jacobian(problem: NlpProblem, x: np.ndarray, h: float) -> np.ndarray:
    m = len(problem.constraints)
    if m == 0:
        return np.empty((0, x.size))
    if problem.constraint_gradients is not None:
        return np.array(
            [np.asarray(gk(x), dtype=float) for gk in problem.constraint_gradients]
        )
    return np.array([fd_gradient(g, x, h) for g in problem.constraints])


def max_violation(problem: NlpProblem, x) -> float:
    """Largest constraint violation at x (0 when feasible)."""
    g = _constraint_values(problem, np.asarray(x, dtype=float))
    if g.size == 0:
        return 0.0
    return float(max(0.0, -g.min()))


def kkt_residual(problem: NlpProblem, x, feas_tol: float = 1e-6, fd_step: float = 1.0) -> float:
    """Scaled first-order stationarity residual at x.

    For maximize f with g_k >= 0, stationarity reads
    grad f + sum_k lambda_k grad g_k = 0 with lambda >= 0 on the active
    set. The multipliers are the non-negative least-squares fit and the
    remaining norm is scaled by max(1, ||grad f||). Zero-gradient interior
    points and vertex optima both score ~0.
    """
    xa = np.asarray(x, dtype=float)
    grad_f = _objective_gradient(problem, xa, fd_step)
    scale = max(1.0, float(np.linalg.norm(grad_f)))
    g = _constraint_values(problem, xa)
    active = np.flatnonzero(g <= ACTIVITY_FACTOR * feas_tol) if g.size else np.empty(0, int)
    if active.size == 0:
        return float(np.linalg.norm(grad_f)) / scale
    jac = _constraint_jacobian(problem, xa, fd_step)[active]
    _, rnorm = nnls(jac.T, -grad_f)
    return float(rnorm) / scale


def _warm_start_multipliers(
    problem: NlpProblem, x: np.ndarray, grad_f: np.ndarray, options: SolverOptions
) -> np.ndarray:
    """Initial multiplier estimate at a feasible start point.

    The nonnegative least-squares stationarity fit over the near-active
    constraints (the same subproblem the KKT residual solves, keeping its
    coefficients). With multipliers close to their final values the first
    augmented-Lagrangian rounds stay feasible, so the penalty weight never
    has to climb and the quasi-Newton curvature survives across rounds;
    from a zero start each penalty level leaves a little violation behind
    and the escalations repeatedly reset that curvature.
    """
    g = _constraint_values(problem, x)
    mu = np.zeros(g.size)
    band = max(ACTIVITY_FACTOR * options.feas_tol, 1e-3)
    active = np.flatnonzero(g <= band)
    if active.size == 0:
        return mu
    jac = _constraint_jacobian(problem, x, options.fd_step)[active]
    coef, _ = nnls(jac.T, -grad_f)
    mu[active] = coef
    return mu


class _Budget:
    def __init__(self, cap: int) -> None:
        self.cap = cap
        self.used = 0

    def take(self) -> bool:
        if self.used >= self.cap:
            return False
        self.used += 1
        return True


class _Incumbent:
    """Best feasible point observed at any evaluation."""

    def __init__(self, feas_tol: float) -> None:
        self.feas_tol = feas_tol
        self.x: np.ndarray | None = None
        self.value = -np.inf

    def offer(self, x: np.ndarray, value: float, violation: float) -> None:
        if violation <= self.feas_tol and value > self.value:
            self.x = x.copy()
            self.value = value


def _bfgs_minimize(
    merit: Callable[[np.ndarray], tuple[float, float, float]],
    merit_gradient: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    grad_tol: float,
    budget: _Budget,
    incumbent: _Incumbent,
    violation_target: float | None = None,
    hinv0: np.ndarray | None = None,
) -> tuple[np.ndarray, bool, np.ndarray]:
    """Quasi-Newton descent on the merit function.

    merit returns (merit value, objective value, violation); the latter
    two feed the incumbent. When violation_target is given the descent
    stops as soon as the violation drops below it (phase-1 use). hinv0
    warm-starts the inverse Hessian approximation, letting successive
    solves of slowly changing merits reuse learned curvature. Returns
    the final point, whether the line search died (a sign of
    non-smoothness or exhausted precision), and the final approximation.
    """
    n = x.size
    hinv = np.eye(n) if hinv0 is None else hinv0
    phi, fval, viol = merit(x)
    incumbent.offer(x, fval, viol)
    if violation_target is not None and viol <= violation_target:
        return x, False, hinv
    grad = merit_gradient(x)
    first = hinv0 is None
    line_search_dead = False

    while float(np.linalg.norm(grad)) > grad_tol and budget.take():
        direction = -hinv @ grad
        slope = float(direction @ grad)
        fresh = False
        if slope >= 0.0:  # stale curvature; fall back to steepest descent
            hinv = np.eye(n)
            direction = -grad
            slope = -float(grad @ grad)
            fresh = True
        accepted = False
        while True:
            alpha = 1.0
            for _ in range(50):
                trial = x + alpha * direction
                phi_t, f_t, viol_t = merit(trial)
                incumbent.offer(trial, f_t, viol_t)
                if phi_t <= phi + 1e-4 * alpha * slope:
                    accepted = True
                    break
                alpha *= 0.5
            if accepted or fresh:
                break
            # A dead search along the quasi-Newton direction usually means
            # a stale approximation; retry once along steepest descent.
            hinv = np.eye(n)
            direction = -grad
            slope = -float(grad @ grad)
            first = True
            fresh = True
        if not accepted:
            line_search_dead = True
            break
        step = alpha * direction
        x_new = x + step
        grad_new = merit_gradient(x_new)
        y = grad_new - grad
        sy = float(step @ y)
        if first and sy > 0.0:
            # Rescale the identity to the first observed curvature.
            hinv = (sy / float(y @ y)) * np.eye(n)
            first = False
        if sy > 1e-10 * float(np.linalg.norm(step)) * float(np.linalg.norm(y)):
            rho_bfgs = 1.0 / sy
            sv = step[:, None]
            yv = y[:, None]
            left = np.eye(n) - rho_bfgs * (sv @ yv.T)
            hinv = left @ hinv @ left.T + rho_bfgs * (sv @ sv.T)
        x, phi, grad = x_new, phi_t, grad_new
        if violation_target is not None and viol_t <= violation_target:
            break
    return x, line_search_dead, hinv


def _restore_feasibility(
    problem: NlpProblem,
    x: np.ndarray,
    options: SolverOptions,
    budget: _Budget,
    incumbent: _Incumbent,
) -> np.ndarray:
    """Phase 1: minimize the squared violation until inside the tolerance."""

    def merit(z: np.ndarray) -> tuple[float, float, float]:
        g = _constraint_values(problem, z)
        viol = np.maximum(0.0, -g)
        theta = 0.5 * float(viol @ viol)
        fval = problem.objective(z)
        return theta, fval, float(viol.max()) if viol.size else 0.0

    def merit_gradient(z: np.ndarray) -> np.ndarray:
        g = _constraint_values(problem, z)
        viol = np.maximum(0.0, -g)
        jac = _constraint_jacobian(problem, z, options.fd_step)
        return -(viol @ jac)

    x, _, _ = _bfgs_minimize(
        merit,
        merit_gradient,
        x,
        grad_tol=1e-12,
        budget=budget,
        incumbent=incumbent,
        violation_target=0.5 * options.feas_tol,
    )
    return x


def _quiet_overflow(fn):
    """Run fn with numpy overflow/invalid warnings silenced.

    Merit values may saturate to inf (and inf - inf to nan) at wild trial
    points, for example when an unbounded objective races ahead of the
    penalty on an infeasible problem. The line search rejects non-finite
    steps, so those warnings carry no signal.
    """

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        with np.errstate(over="ignore", invalid="ignore"):
            return fn(*args, **kwargs)

    return wrapper


@_quiet_overflow
def maximize(problem: NlpProblem, x0, options: SolverOptions | None = None) -> NlpResult:
    """Maximize the problem objective from x0 subject to g_k(x) >= 0.

    Returns the best point found. status is "converged" when the KKT
    residual and the worst violation meet the tolerances at the returned
    point, "iteration-cap" when the budget ran out first, and
    "numerical-failure" when progress stalled (including failure to
    restore feasibility, as happens on geometrically impossible
    placements).
    """
    options = options or SolverOptions()
    x = np.asarray(x0, dtype=float).copy()
    if x.size != problem.dimension:
        raise ValueError(f"x0 has size {x.size}, problem dimension is {problem.dimension}")

    m = len(problem.constraints)
    # Hold back part of the budget so a run that ends the outer loop slightly
    # infeasible can be pulled inside the tolerance instead of discarded.
    reserve = min(60, options.max_iter // 5) if m else 0
    budget = _Budget(options.max_iter - reserve)
    incumbent = _Incumbent(options.feas_tol)
    start_value = problem.objective(x)
    start_violation = max_violation(problem, x)
    incumbent.offer(x, start_value, start_violation)

    if start_violation > options.feas_tol:
        x = _restore_feasibility(problem, x, options, budget, incumbent)

    rho = options.rho0
    grad0 = _objective_gradient(problem, x, options.fd_step)
    mu = np.zeros(m)
    if m and max_violation(problem, x) <= options.feas_tol:
        mu = _warm_start_multipliers(problem, x, grad0, options)
    gnorm0 = float(np.linalg.norm(grad0))
    gscale = max(1.0, gnorm0)
    omega_min = 0.3 * options.kkt_tol * gscale
    omega = min(0.1 * gscale, max(0.5 * gnorm0, omega_min))
    previous_violation = np.inf
    line_search_dead = False

    def merit(z: np.ndarray) -> tuple[float, float, float]:
        fval = problem.objective(z)
        phi = -fval
        worst = 0.0
        if m:
            g = _constraint_values(problem, z)
            cutoff = mu / rho
            low = g <= cutoff
            phi += float(np.sum((-mu * g + 0.5 * rho * g**2)[low]))
            phi -= float(np.sum((mu[~low] ** 2) / (2.0 * rho)))
            worst = float(max(0.0, -g.min()))
        return phi, fval, worst

    def merit_gradient(z: np.ndarray) -> np.ndarray:
        grad = -_objective_gradient(problem, z, options.fd_step)
        if m:
            g = _constraint_values(problem, z)
            weight = np.where(g <= mu / rho, -mu + rho * g, 0.0)
            jac = _constraint_jacobian(problem, z, options.fd_step)
            grad += weight @ jac
        return grad

    hinv_carry: np.ndarray | None = None
    best_x: np.ndarray | None = None
    best_value = -np.inf
    best_kkt = np.inf
    for round_index in range(30):
        x, dead, hinv_carry = _bfgs_minimize(
            merit,
            merit_gradient,
            x,
            grad_tol=max(omega, omega_min),
            budget=budget,
            incumbent=incumbent,
            hinv0=hinv_carry,
        )
        line_search_dead = line_search_dead or dead
        g = _constraint_values(problem, x)
        violation = float(max(0.0, -g.min())) if m else 0.0
        if m:
            mu = np.maximum(0.0, mu - rho * g)
        if violation <= options.feas_tol:
            residual = kkt_residual(problem, x, options.feas_tol, options.fd_step)
            logger.debug(
                "round %d: used %d, violation %.3e, kkt %.3e, omega %.3e, rho %.1e, dead %s",
                round_index, budget.used, violation, residual, omega, rho, dead,
            )
            if residual < best_kkt:
                best_x = x.copy()
                best_value = problem.objective(x)
                best_kkt = residual
            if residual <= options.kkt_tol:
                break
            omega = max(omega * 0.2, omega_min)
        elif violation > 0.1 * previous_violation:
            logger.debug(
                "round %d: used %d, violation %.3e, escalating rho %.1e",
                round_index, budget.used, violation, rho,
            )
            rho = min(rho * 10.0, 1e12)
            hinv_carry = None  # the penalty curvature just jumped
        else:
            omega = max(omega * 0.2, omega_min)
        previous_violation = max(violation, 1e-300)
        if budget.used >= budget.cap or (dead and violation <= options.feas_tol):
            break

    capped = budget.used >= budget.cap
    final_violation = max_violation(problem, x)
    if reserve and final_violation > options.feas_tol:
        rescue_budget = _Budget(reserve)
        x = _restore_feasibility(problem, x, options, rescue_budget, incumbent)
        budget.used += rescue_budget.used
        final_violation = max_violation(problem, x)

    final_value = problem.objective(x)
    # Fall back to the best feasible point seen when the outer loop ended
    # infeasible or below a feasible start; this keeps the guarantee that a
    # feasible x0 is never made worse.
    went_backwards = start_violation <= options.feas_tol and final_value < start_value
    if incumbent.x is not None and (final_violation > options.feas_tol or went_backwards):
        x = incumbent.x
        final_value = incumbent.value
        final_violation = max_violation(problem, x)

    residual = kkt_residual(problem, x, options.feas_tol, options.fd_step)
    # Budget exhaustion can stop the descent mid-step at a noisy iterate;
    # prefer the most stationary feasible round end seen, unless that would
    # hand a feasible start back something worse than it came in with.
    best_allowed = best_x is not None and not (
        start_violation <= options.feas_tol and best_value < start_value
    )
    if best_allowed and (final_violation > options.feas_tol or best_kkt < residual):
        x = best_x
        final_value = best_value
        final_violation = max_violation(problem, x)
        residual = best_kkt
    if final_violation <= options.feas_tol and residual <= options.kkt_tol:
        status: Status = "converged"
    elif capped:
        status = "iteration-cap"
    else:
        status = "numerical-failure"
    return NlpResult(
        x=x,
        objective_value=final_value,
        status=status,
        kkt_residual=residual,
        max_violation=final_violation,
        iterations=budget.used,
    )
