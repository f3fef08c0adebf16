"""Turbine description: rated quantities plus tabulated power and thrust curves.

Both curves are piecewise-linear tables sampled on the operating band
[cut-in, cut-out]. Outside the band the machine is parked: zero power,
zero thrust. The thrust coefficient is clamped strictly below 1 so the
wake deficit stays finite.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

# Highest admissible thrust coefficient. Ct = 1 would make the axial
# induction singular, so tables are clamped just below.
CT_MAX = 1.0 - 1e-9


@dataclass(frozen=True)
class TurbineSpec:
    """Physical description of one turbine model.

    Attributes
    ----------
    name : str
        Free-form model label.
    hub_height : float
        Hub height above sea level in metres.
    rotor_diameter : float
        Rotor diameter in metres.
    v_ci, v_r, v_co : float
        Cut-in, rated and cut-out wind speeds in m/s.
    rated_power : float
        Nameplate power in watts.
    power_table : np.ndarray
        (m, 2) array of (speed m/s, power W) knots, speeds strictly increasing.
    thrust_table : np.ndarray
        (m, 2) array of (speed m/s, Ct) knots, speeds strictly increasing.
    """

    name: str
    hub_height: float
    rotor_diameter: float
    v_ci: float
    v_r: float
    v_co: float
    rated_power: float
    power_table: np.ndarray = field(repr=False)
    thrust_table: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if not (self.hub_height > 0 and self.rotor_diameter > 0):
            raise ValueError("hub height and rotor diameter must be positive")
        if not (0 < self.v_ci < self.v_r < self.v_co):
            raise ValueError("need 0 < cut-in < rated < cut-out")
        if self.rated_power <= 0:
            raise ValueError("rated power must be positive")
        for label, table in (("power_table", self.power_table), ("thrust_table", self.thrust_table)):
            if table.ndim != 2 or table.shape[1] != 2 or table.shape[0] < 2:
                raise ValueError(f"{label} must be an (m, 2) array with m >= 2")
            if np.any(np.diff(table[:, 0]) <= 0):
                raise ValueError(f"{label} speeds must be strictly increasing")
        if np.any(self.power_table[:, 1] < 0):
            raise ValueError("power_table values must be non-negative")
        if np.any(self.thrust_table[:, 1] < 0) or np.any(self.thrust_table[:, 1] >= 1):
            raise ValueError("thrust_table values must lie in [0, 1)")

    @property
    def rotor_radius(self) -> float:
        return 0.5 * self.rotor_diameter

    @property
    def rotor_area(self) -> float:
        return math.pi * self.rotor_radius**2


def power(spec: TurbineSpec, v):
    """Electrical power in watts at hub-height wind speed v.

    Piecewise-linear in the tabulated knots on [v_ci, v_co); zero below
    cut-in and at or above cut-out, where the controller parks the rotor.
    Accepts scalars or arrays.
    """
    varr = np.asarray(v, dtype=float)
    p = np.interp(varr, spec.power_table[:, 0], spec.power_table[:, 1])
    p = np.where((varr >= spec.v_ci) & (varr < spec.v_co), p, 0.0)
    return float(p) if p.ndim == 0 else p


def thrust_coefficient(spec: TurbineSpec, v):
    """Thrust coefficient at hub-height wind speed v.

    Piecewise-linear on [v_ci, v_co), zero outside, clamped to [0, CT_MAX].
    Accepts scalars or arrays.
    """
    varr = np.asarray(v, dtype=float)
    ct = np.interp(varr, spec.thrust_table[:, 0], spec.thrust_table[:, 1])
    ct = np.clip(ct, 0.0, CT_MAX)
    ct = np.where((varr >= spec.v_ci) & (varr < spec.v_co), ct, 0.0)
    return float(ct) if ct.ndim == 0 else ct


def load_turbine(path: str) -> TurbineSpec:
    """Read a TurbineSpec from a JSON file.

    Raises ValueError naming the offending entry on malformed input.
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    return turbine_from_dict(raw)


def turbine_from_dict(raw: dict) -> TurbineSpec:
    required = [
        "name",
        "hub_height_m",
        "rotor_diameter_m",
        "cut_in_ms",
        "rated_ms",
        "cut_out_ms",
        "rated_power_w",
        "power_curve",
        "thrust_curve",
    ]
    for key in required:
        if key not in raw:
            raise ValueError(f"turbine file missing entry '{key}'")
    for key in ("power_curve", "thrust_curve"):
        rows = raw[key]
        if not isinstance(rows, list) or any(len(r) != 2 for r in rows):
            raise ValueError(f"turbine entry '{key}' must be a list of [speed, value] pairs")
    try:
        return TurbineSpec(
            name=str(raw["name"]),
            hub_height=float(raw["hub_height_m"]),
            rotor_diameter=float(raw["rotor_diameter_m"]),
            v_ci=float(raw["cut_in_ms"]),
            v_r=float(raw["rated_ms"]),
            v_co=float(raw["cut_out_ms"]),
            rated_power=float(raw["rated_power_w"]),
            power_table=np.asarray(raw["power_curve"], dtype=float),
            thrust_table=np.asarray(raw["thrust_curve"], dtype=float),
        )
    except (TypeError, ValueError) as exc:
        raise ValueError(f"invalid turbine file: {exc}") from exc


def turbine_to_dict(spec: TurbineSpec) -> dict:
    return {
        "name": spec.name,
        "hub_height_m": spec.hub_height,
        "rotor_diameter_m": spec.rotor_diameter,
        "cut_in_ms": spec.v_ci,
        "rated_ms": spec.v_r,
        "cut_out_ms": spec.v_co,
        "rated_power_w": spec.rated_power,
        "power_curve": spec.power_table.tolist(),
        "thrust_curve": spec.thrust_table.tolist(),
    }
