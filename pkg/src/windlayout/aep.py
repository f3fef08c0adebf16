"""Expected annual energy production of a farm under a wind rose.

For each sector the free-stream speed is integrated over the operating
band against the sector's Weibull density, with every turbine's power
evaluated at its waked speed. Energies are accumulated in joules and
reported in GWh per year, sector by sector, next to a wake-free
reference that prices the losses.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import as_layout
from .turbine import TurbineSpec, power
from .wake import waked_speed_table
from .wind_resource import SectorModel, WindRose, weibull_pdf

HOURS_PER_YEAR = 8760.0
JOULES_PER_GWH = 3.6e12
DEFAULT_DV = 0.1


@dataclass(frozen=True)
class AepBreakdown:
    """Annual energy production split by sector, with wake losses.

    All energies are GWh/yr. Losses are percentages of the wake-free
    total; the per-sector entries therefore sum to the total loss, and
    per-sector energies sum to the total energy.
    """

    total: float
    per_sector: tuple[float, ...]
    wake_loss_total: float
    wake_loss_per_sector: tuple[float, ...]
    no_wake_total: float


def speed_grid(spec: TurbineSpec, dv: float = DEFAULT_DV) -> np.ndarray:
    """Quadrature nodes spanning [cut-in, cut-out] with spacing <= dv."""
    if dv <= 0:
        raise ValueError("dv must be positive")
    span = spec.v_co - spec.v_ci
    intervals = max(1, int(math.ceil(span / dv - 1e-9)))
    return np.linspace(spec.v_ci, spec.v_co, intervals + 1)


def _power_on_band(spec: TurbineSpec, v: np.ndarray) -> np.ndarray:
    """Power at waked speeds for quadrature nodes on [cut-in, cut-out].

    Below cut-in the machine is parked. At the cut-out node the operating
    curve's left limit (rated power) applies: the integrand is integrated
    over the operating band, and a zero at that single node would inject
    a spacing-proportional error into the composite trapezoid rule.
    """
    p = np.interp(v, spec.power_table[:, 0], spec.power_table[:, 1])
    return np.where(v >= spec.v_ci, p, 0.0)


def _sector_energy_joules(
    waked: np.ndarray, grid: np.ndarray, spec: TurbineSpec, sector: SectorModel
) -> float:
    """Integrate one sector lane: waked is (n, G) at the grid nodes."""
    production = _power_on_band(spec, waked).sum(axis=0)
    density = weibull_pdf(grid, sector.lam, sector.delta)
    watts = float(np.trapezoid(density * production, grid))
    return HOURS_PER_YEAR * 3600.0 * sector.rho * watts


def _degenerate_energy_joules(
    layout, spec: TurbineSpec, sector: SectorModel, k: float
) -> float:
    """Deterministic-speed fallback for sectors without a usable fit.

    This is a point evaluation, not a quadrature, so the ordinary power
    curve applies (zero at or beyond cut-out).
    """
    v = sector.fallback_speed or 0.0
    if v <= 0.0:
        return 0.0
    waked = waked_speed_table(layout, spec, k, [sector.theta], [v])[0, :, 0]
    production = float(power(spec, waked).sum())
    return HOURS_PER_YEAR * 3600.0 * sector.rho * production


def sector_energy(layout, spec: TurbineSpec, sector: SectorModel, k: float, dv: float = DEFAULT_DV) -> float:
    """Expected energy of one sector in GWh/yr, wake effects included."""
    pts = as_layout(layout)
    if sector.rho == 0.0:
        return 0.0
    if sector.degenerate:
        return _degenerate_energy_joules(pts, spec, sector, k) / JOULES_PER_GWH
    grid = speed_grid(spec, dv)
    waked = waked_speed_table(pts, spec, k, [sector.theta], grid)[0]
    return _sector_energy_joules(waked, grid, spec, sector) / JOULES_PER_GWH


def expected_aep(layout, spec: TurbineSpec, rose: WindRose, k: float, dv: float = DEFAULT_DV) -> AepBreakdown:
    """Expected annual energy production under every sector of the rose.

    Sector lanes are evaluated in one batched sweep over a shared speed
    grid, so the per-sector figures match sector_energy exactly and sum
    to the total.
    """
    pts = as_layout(layout)
    n = pts.shape[0]
    grid = speed_grid(spec, dv)
    power_free = _power_on_band(spec, grid)

    active = [s for s in rose.sectors if s.rho > 0.0 and not s.degenerate]
    waked_by_index: dict[int, np.ndarray] = {}
    if active:
        lanes = waked_speed_table(pts, spec, k, [s.theta for s in active], grid)
        for lane, s in enumerate(active):
            waked_by_index[s.index] = lanes[lane]

    energies: list[float] = []
    references: list[float] = []
    for s in rose.sectors:
        if s.rho == 0.0:
            energies.append(0.0)
            references.append(0.0)
        elif s.degenerate:
            energies.append(_degenerate_energy_joules(pts, spec, s, k) / JOULES_PER_GWH)
            v = s.fallback_speed or 0.0
            ref_watts = n * power(spec, v) if v > 0 else 0.0
            references.append(HOURS_PER_YEAR * 3600.0 * s.rho * ref_watts / JOULES_PER_GWH)
        else:
            energies.append(
                _sector_energy_joules(waked_by_index[s.index], grid, spec, s) / JOULES_PER_GWH
            )
            density = weibull_pdf(grid, s.lam, s.delta)
            ref_watts = n * float(np.trapezoid(density * power_free, grid))
            references.append(HOURS_PER_YEAR * 3600.0 * s.rho * ref_watts / JOULES_PER_GWH)

    total = float(sum(energies))
    no_wake_total = float(sum(references))
    if no_wake_total > 0.0:
        loss_per_sector = tuple(
            100.0 * (ref - e) / no_wake_total for ref, e in zip(references, energies)
        )
        loss_total = 100.0 * (1.0 - total / no_wake_total)
    else:
        loss_per_sector = tuple(0.0 for _ in energies)
        loss_total = 0.0
    return AepBreakdown(total, tuple(energies), loss_total, loss_per_sector, no_wake_total)
