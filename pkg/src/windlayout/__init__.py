"""Offshore wind farm energy estimation and layout optimization.

The package models farm energy with a top-hat wake behind each rotor
(linear expansion, quadratic deficit decay, root-sum-square combination)
under a sectorized Weibull wind rose, and optimizes turbine positions by
multistart constrained nonlinear programming seeded with a
triangle-area-maximizing spreading heuristic.
"""
from .aep import DEFAULT_DV, AepBreakdown, expected_aep, sector_energy
from .driver import (
    OptimizationOutcome,
    RestartRecord,
    RunConfig,
    SensitivityRow,
    SweepRow,
    grid_layout,
    minimum_distance,
    optimize_layout,
    rms_distance,
    rose_rotation_sensitivity,
    saturation_sweep,
)
from .geometry import (
    FarmBoundary,
    FeasibilityReport,
    containment_margins,
    is_feasible,
    min_distance_margins,
)
from .seeding import SeedingInfeasible, delaunay, seed_layout, widespread
from .solver import NlpProblem, NlpResult, SolverOptions, kkt_residual, maximize
from .turbine import TurbineSpec, load_turbine, power, thrust_coefficient
from .wake import (
    combine_deficits,
    decay_factor,
    farm_velocities,
    overlap_area,
    pair_deficit,
    waked_speed_table,
)
from .wind_resource import (
    SectorModel,
    WindRose,
    WindSample,
    build_rose,
    fit_weibull_mle,
    load_rose,
    load_wind_csv,
    save_rose,
)

__version__ = "0.1.0"

__all__ = [
    "AepBreakdown",
    "DEFAULT_DV",
    "FarmBoundary",
    "FeasibilityReport",
    "NlpProblem",
    "NlpResult",
    "OptimizationOutcome",
    "RestartRecord",
    "RunConfig",
    "SectorModel",
    "SeedingInfeasible",
    "SensitivityRow",
    "SolverOptions",
    "SweepRow",
    "TurbineSpec",
    "WindRose",
    "WindSample",
    "build_rose",
    "combine_deficits",
    "containment_margins",
    "decay_factor",
    "delaunay",
    "expected_aep",
    "farm_velocities",
    "fit_weibull_mle",
    "grid_layout",
    "is_feasible",
    "kkt_residual",
    "load_rose",
    "load_turbine",
    "load_wind_csv",
    "maximize",
    "min_distance_margins",
    "minimum_distance",
    "optimize_layout",
    "overlap_area",
    "pair_deficit",
    "power",
    "rms_distance",
    "rose_rotation_sensitivity",
    "saturation_sweep",
    "save_rose",
    "sector_energy",
    "seed_layout",
    "thrust_coefficient",
    "waked_speed_table",
    "widespread",
    "__version__",
]
