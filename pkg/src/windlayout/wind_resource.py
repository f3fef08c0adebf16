"""Wind climate modelling from 10 m measurement records.

A measurement campaign yields (timestamp, speed at 10 m, direction) rows.
Speeds are extrapolated to hub height with the logarithmic profile,
directions are grouped into equal angular sectors, and each sector gets
its own Weibull fit by maximum likelihood plus an occurrence probability.
The result is a WindRose that the energy model integrates over.

Directions follow the meteorological convention: degrees clockwise from
north, naming where the wind comes from.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, replace
from datetime import datetime

import numpy as np

# Fits with fewer positive samples than this are not trusted.
MIN_FIT_SAMPLES = 30
# Shape values beyond this bracket are treated as a point mass.
SHAPE_CAP = 1e4
# Stationarity criterion for the profile-likelihood shape equation.
SHAPE_RESIDUAL_TOL = 1e-10
MAX_FIT_ITERATIONS = 100


class DegenerateSampleError(Exception):
    """Raised when a sample admits no meaningful Weibull fit."""


class FitConvergenceError(Exception):
    """Raised when the shape equation solver exhausts its iteration cap."""


@dataclass(frozen=True)
class WindSample:
    """One measurement row: time, speed at 10 m (m/s), direction (deg)."""

    timestamp: datetime
    v10: float
    direction: float

    def __post_init__(self) -> None:
        if self.v10 < 0:
            raise ValueError("wind speed must be non-negative")
        if not (0.0 <= self.direction < 360.0):
            raise ValueError("direction must lie in [0, 360)")


@dataclass(frozen=True)
class SectorModel:
    """Fitted wind model for one directional sector.

    rho is the sector's occurrence probability. lam and delta are the
    Weibull scale and shape of the hub-height speed conditional on the
    sector; they are None when the sector is degenerate, in which case
    fallback_speed (the sector mean, m/s) stands in for the whole
    distribution.
    """

    index: int
    theta: float
    rho: float
    lam: float | None
    delta: float | None
    sample_count: int
    degenerate: bool = False
    fallback_speed: float | None = None

    def __post_init__(self) -> None:
        if not (0.0 <= self.rho <= 1.0):
            raise ValueError("sector probability must lie in [0, 1]")
        if not self.degenerate:
            if self.lam is None or self.delta is None:
                raise ValueError("non-degenerate sector needs Weibull parameters")
            if self.lam <= 0 or self.delta <= 0:
                raise ValueError("Weibull parameters must be positive")


@dataclass(frozen=True)
class WindRose:
    """Per-sector wind models at a common hub height.

    Sector centres are equally spaced, 360/n_sectors apart. Probabilities
    sum to one over all sectors.
    """

    n_sectors: int
    sectors: tuple[SectorModel, ...]
    hub_height: float
    z0: float

    def __post_init__(self) -> None:
        if self.n_sectors < 1 or len(self.sectors) != self.n_sectors:
            raise ValueError("rose must carry exactly n_sectors sector models")
        if not (self.hub_height > 0 and 0 < self.z0 < self.hub_height):
            raise ValueError("need 0 < z0 < hub height")
        total = sum(s.rho for s in self.sectors)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"sector probabilities sum to {total}, expected 1")
        step = 360.0 / self.n_sectors
        thetas = [s.theta for s in self.sectors]
        for i in range(1, self.n_sectors):
            gap = (thetas[i] - thetas[i - 1]) % 360.0
            if abs(gap - step) > 1e-9:
                raise ValueError("sector centres must be equally spaced")
        if all(s.degenerate for s in self.sectors):
            raise ValueError("every sector is degenerate; the rose is unusable")

    def rotated(self, angle: float) -> "WindRose":
        """Same climate with every sector centre shifted by angle degrees."""
        shifted = tuple(replace(s, theta=(s.theta + angle) % 360.0) for s in self.sectors)
        return replace(self, sectors=shifted)


def extrapolate_to_hub(v10: float, z: float, z0: float):
    """Scale a 10 m wind speed to height z with the log profile.

    v(z) = v10 * ln(z / z0) / ln(10 / z0). Accepts scalars or arrays.
    """
    if not (0 < z0 < z and z0 < 10.0):
        raise ValueError("need 0 < z0 < z and z0 < 10 (the reference height)")
    factor = math.log(z / z0) / math.log(10.0 / z0)
    out = np.asarray(v10, dtype=float) * factor
    return float(out) if out.ndim == 0 else out


def bin_by_sector(direction, n_sectors: int):
    """Map directions (degrees) to 1-based sector indices.

    Sector s is centred on theta_s = (s - 1) * 360 / n_sectors, with
    sector 1 centred due north, and covers the half-open arc
    (theta_s - 180/n_sectors, theta_s + 180/n_sectors], wrapping at north.
    Accepts scalars or arrays.
    """
    if n_sectors < 1:
        raise ValueError("need at least one sector")
    width = 360.0 / n_sectors
    d = np.asarray(direction, dtype=float)
    if np.any(d < 0) or np.any(d >= 360.0):
        raise ValueError("directions must lie in [0, 360)")
    t = np.mod(d + 0.5 * width, 360.0)
    s = np.ceil(t / width).astype(int)
    s = np.where(s == 0, n_sectors, s)
    return int(s) if s.ndim == 0 else s


def sector_center(index: int, n_sectors: int) -> float:
    """Centre angle in degrees of the 1-based sector index."""
    return (index - 1) * 360.0 / n_sectors


def weibull_pdf(v, lam: float, delta: float):
    """Weibull density with scale lam and shape delta, for v > 0."""
    varr = np.asarray(v, dtype=float)
    z = varr / lam
    out = (delta / lam) * z ** (delta - 1.0) * np.exp(-(z**delta))
    return float(out) if out.ndim == 0 else out


def _shape_equation(delta: float, w: np.ndarray, log_w: np.ndarray, mean_log: float) -> tuple[float, float]:
    """Residual and derivative of the profile-likelihood shape equation.

    With speeds normalised to w = v / max(v), the maximum-likelihood shape
    solves  A(delta) - 1/delta - mean(log v) = 0  where A is the w**delta
    weighted mean of log w (the normalisation cancels). The derivative of A
    is the weighted variance of log w, so the residual is non-decreasing.
    """
    p = w**delta
    total = p.sum()
    a = float((p * log_w).sum() / total)
    var = float((p * log_w**2).sum() / total) - a * a
    g = a - 1.0 / delta - mean_log
    dg = var + 1.0 / delta**2
    return g, dg


def fit_weibull_mle(speeds) -> tuple[float, float]:
    """Maximum-likelihood Weibull (scale, shape) for strictly positive speeds.

    Solves the one-dimensional profile-likelihood equation for the shape
    with a bracketed Newton iteration (bisection fallback), then recovers
    the scale in closed form. Raises DegenerateSampleError when the sample
    is too small or has no spread, FitConvergenceError past the iteration
    cap.
    """
    v = np.asarray(speeds, dtype=float)
    if v.ndim != 1:
        raise ValueError("speeds must be one-dimensional")
    if np.any(v <= 0):
        raise ValueError("speeds must be strictly positive")
    if v.size < MIN_FIT_SAMPLES:
        raise DegenerateSampleError(f"only {v.size} positive samples, need {MIN_FIT_SAMPLES}")

    vmax = float(v.max())
    w = v / vmax
    log_w = np.log(w)
    mean_log = float(log_w.mean())
    spread = float(log_w.std())
    if spread == 0.0:
        raise DegenerateSampleError("all samples are identical; shape diverges")

    # Moment-based starting point: Var(log V) = pi^2 / (6 delta^2).
    delta = math.pi / (spread * math.sqrt(6.0))
    delta = min(max(delta, 1e-2), SHAPE_CAP)

    # Establish a sign-changing bracket around the root.
    lo, hi = delta, delta
    g, _ = _shape_equation(delta, w, log_w, mean_log)
    if g > 0:
        while g > 0:
            hi = lo
            lo = lo / 2.0
            if lo < 1e-6:
                raise DegenerateSampleError("shape equation has no positive root")
            g, _ = _shape_equation(lo, w, log_w, mean_log)
    else:
        while g <= 0:
            lo = hi
            hi = hi * 2.0
            if hi > SHAPE_CAP:
                raise DegenerateSampleError("shape diverges; sample behaves like a point mass")
            g, _ = _shape_equation(hi, w, log_w, mean_log)

    for _ in range(MAX_FIT_ITERATIONS):
        g, dg = _shape_equation(delta, w, log_w, mean_log)
        if abs(g) <= SHAPE_RESIDUAL_TOL:
            break
        if g > 0:
            hi = delta
        else:
            lo = delta
        step = g / dg
        candidate = delta - step
        if not (lo < candidate < hi):
            candidate = 0.5 * (lo + hi)  # Newton left the bracket; bisect
        delta = candidate
    else:
        raise FitConvergenceError(f"shape equation residual {g:.3e} after {MAX_FIT_ITERATIONS} iterations")

    lam = vmax * float(np.mean(w**delta)) ** (1.0 / delta)
    return lam, float(delta)


def build_rose(samples, n_sectors: int, hub_height: float, z0: float) -> WindRose:
    """Fit a WindRose from raw 10 m measurements.

    Calm rows (v10 = 0) carry no direction information and are dropped
    before both the probabilities and the fits. Sectors whose fit fails
    keep their probability and fall back to a deterministic speed equal
    to the sector mean; a warning is emitted for each.
    """
    if n_sectors < 1:
        raise ValueError("need at least one sector")
    v10 = np.array([s.v10 for s in samples], dtype=float)
    direction = np.array([s.direction for s in samples], dtype=float)
    keep = v10 > 0
    v10, direction = v10[keep], direction[keep]
    if v10.size == 0:
        raise ValueError("no non-calm samples to fit")

    hub = extrapolate_to_hub(v10, hub_height, z0)
    idx = bin_by_sector(direction, n_sectors)
    total = v10.size

    sectors = []
    for s in range(1, n_sectors + 1):
        in_sector = hub[idx == s]
        count = int(in_sector.size)
        rho = count / total
        theta = sector_center(s, n_sectors)
        if count == 0:
            sectors.append(
                SectorModel(s, theta, 0.0, None, None, 0, degenerate=True, fallback_speed=0.0)
            )
            continue
        try:
            lam, delta = fit_weibull_mle(in_sector)
        except DegenerateSampleError as exc:
            warnings.warn(
                f"sector {s}: {exc}; using deterministic fallback speed", stacklevel=2
            )
            sectors.append(
                SectorModel(
                    s,
                    theta,
                    rho,
                    None,
                    None,
                    count,
                    degenerate=True,
                    fallback_speed=float(in_sector.mean()),
                )
            )
            continue
        sectors.append(SectorModel(s, theta, rho, lam, delta, count))

    return WindRose(n_sectors, tuple(sectors), hub_height, z0)


WIND_CSV_HEADER = ["timestamp", "v10_ms", "direction_deg"]


def load_wind_csv(path: str) -> list[WindSample]:
    """Parse a measurement CSV with columns timestamp,v10_ms,direction_deg.

    Timestamps must be ISO 8601. Malformed rows are collected and reported
    together with their line numbers in a single ValueError.
    """
    samples: list[WindSample] = []
    bad: list[str] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != WIND_CSV_HEADER:
            raise ValueError(
                f"wind CSV header must be {','.join(WIND_CSV_HEADER)!r}, got {header}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                bad.append(f"line {lineno}: expected 3 fields, got {len(row)}")
                continue
            try:
                ts = datetime.fromisoformat(row[0].strip())
                sample = WindSample(ts, float(row[1]), float(row[2]))
            except ValueError as exc:
                bad.append(f"line {lineno}: {exc}")
                continue
            samples.append(sample)
    if bad:
        shown = "; ".join(bad[:20])
        more = "" if len(bad) <= 20 else f" (and {len(bad) - 20} more)"
        raise ValueError(f"invalid wind CSV rows: {shown}{more}")
    return samples


def rose_to_dict(rose: WindRose) -> dict:
    return {
        "n_sectors": rose.n_sectors,
        "hub_height_m": rose.hub_height,
        "z0_m": rose.z0,
        "sectors": [
            {
                "index": s.index,
                "theta_deg": s.theta,
                "rho": s.rho,
                "lambda_ms": s.lam,
                "delta": s.delta,
                "sample_count": s.sample_count,
                "degenerate": s.degenerate,
                "fallback_speed_ms": s.fallback_speed,
            }
            for s in rose.sectors
        ],
    }


def rose_from_dict(raw: dict) -> WindRose:
    try:
        sectors = tuple(
            SectorModel(
                index=int(s["index"]),
                theta=float(s["theta_deg"]),
                rho=float(s["rho"]),
                lam=None if s["lambda_ms"] is None else float(s["lambda_ms"]),
                delta=None if s["delta"] is None else float(s["delta"]),
                sample_count=int(s["sample_count"]),
                degenerate=bool(s.get("degenerate", False)),
                fallback_speed=None
                if s.get("fallback_speed_ms") is None
                else float(s["fallback_speed_ms"]),
            )
            for s in raw["sectors"]
        )
        return WindRose(
            n_sectors=int(raw["n_sectors"]),
            sectors=sectors,
            hub_height=float(raw["hub_height_m"]),
            z0=float(raw["z0_m"]),
        )
    except KeyError as exc:
        raise ValueError(f"rose file missing entry {exc}") from exc


def save_rose(rose: WindRose, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(rose_to_dict(rose), fh, indent=2)
        fh.write("\n")


def load_rose(path: str) -> WindRose:
    with open(path, "r", encoding="utf-8") as fh:
        return rose_from_dict(json.load(fh))
