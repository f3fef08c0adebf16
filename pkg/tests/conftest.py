"""Shared fixtures: a reference turbine, small roses, the shipped site."""
import math

import numpy as np
import pytest

from windlayout.geometry import FarmBoundary
from windlayout.turbine import TurbineSpec
from windlayout.wind_resource import SectorModel, WindRose

POWER_KNOTS = np.array(
    [
        [3.0, 40.5e3],
        [4.0, 177.7e3],
        [5.0, 403.9e3],
        [6.0, 737.6e3],
        [7.0, 1187.2e3],
        [8.0, 1771.1e3],
        [9.0, 2518.6e3],
        [10.0, 3448.4e3],
        [11.0, 4562.5e3],
        [11.4, 5.0e6],
        [25.0, 5.0e6],
    ]
)
THRUST_KNOTS = np.array(
    [
        [3.0, 0.99],
        [4.0, 0.87],
        [5.0, 0.81],
        [6.0, 0.79],
        [7.0, 0.79],
        [8.0, 0.79],
        [9.0, 0.78],
        [10.0, 0.74],
        [11.0, 0.65],
        [11.4, 0.58],
        [12.0, 0.48],
        [14.0, 0.32],
        [16.0, 0.22],
        [20.0, 0.12],
        [25.0, 0.06],
    ]
)


def reference_spec() -> TurbineSpec:
    return TurbineSpec(
        name="test-5mw",
        hub_height=90.0,
        rotor_diameter=126.0,
        v_ci=3.0,
        v_r=11.4,
        v_co=25.0,
        rated_power=5.0e6,
        power_table=POWER_KNOTS,
        thrust_table=THRUST_KNOTS,
    )


def uniform_rose(n_sectors: int, lam: float = 9.0, delta: float = 2.1) -> WindRose:
    rho = 1.0 / n_sectors
    sectors = tuple(
        SectorModel(
            index=j + 1,
            theta=j * 360.0 / n_sectors,
            rho=rho,
            lam=lam,
            delta=delta,
            sample_count=1000,
        )
        for j in range(n_sectors)
    )
    return WindRose(n_sectors=n_sectors, sectors=sectors, hub_height=90.0, z0=0.0002)


def skewed_rose(n_sectors: int = 12, peak_deg: float = 45.0, kappa: float = 1.2) -> WindRose:
    """Smooth unimodal rose peaking at peak_deg, matching the shipped data."""
    thetas = [j * 360.0 / n_sectors for j in range(n_sectors)]
    w = np.array([math.exp(kappa * math.cos(math.radians(t - peak_deg))) for t in thetas])
    rho = w / w.sum()
    rho[-1] = 1.0 - rho[:-1].sum()
    sectors = tuple(
        SectorModel(
            index=j + 1,
            theta=thetas[j],
            rho=float(rho[j]),
            lam=9.5 + 2.0 * math.cos(math.radians(thetas[j] - peak_deg)),
            delta=2.05 + 0.25 * math.cos(math.radians(thetas[j] - peak_deg)),
            sample_count=500,
        )
        for j in range(n_sectors)
    )
    return WindRose(n_sectors=n_sectors, sectors=sectors, hub_height=90.0, z0=0.0002)


@pytest.fixture(scope="session")
def spec() -> TurbineSpec:
    return reference_spec()


@pytest.fixture(scope="session")
def rose12() -> WindRose:
    return uniform_rose(12)


@pytest.fixture(scope="session")
def replica_boundary() -> FarmBoundary:
    return FarmBoundary(
        np.array([[0.0, 0.0], [1600.0, 0.0], [1600.0, 2300.0], [0.0, 2300.0]])
    )


@pytest.fixture(scope="session")
def square_km() -> FarmBoundary:
    return FarmBoundary(
        np.array([[0.0, 0.0], [1000.0, 0.0], [1000.0, 1000.0], [0.0, 1000.0]])
    )
