"""Rendering of results: CSV tables, SVG figures, and run manifests.

Everything here builds deterministic text. Floats are written with
Python's shortest round-trip representation, so parsing a table back
recovers bit-identical values and emitted totals re-verify exactly
against the sum of their rows.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from datetime import datetime, timezone

import numpy as np

from .aep import AepBreakdown
from .geometry import FarmBoundary, as_layout
from .turbine import TurbineSpec

TOOL_NAME = "windlayout"
TOOL_VERSION = "0.1.0"


def format_float(x: float) -> str:
    """Shortest decimal string that round-trips to the same float."""
    return repr(float(x))


def revenue_meur(total_gwh: float, price_eur_per_kwh: float, cost_eur_per_kwh: float) -> float:
    """Yearly margin in millions of euros: energy times (price - cost).

    One GWh is 1e6 kWh, so the M-euro figure is simply GWh times the
    per-kWh margin.
    """
    return total_gwh * (price_eur_per_kwh - cost_eur_per_kwh)


def sector_table(breakdown: AepBreakdown) -> str:
    """Per-sector energy table with a trailing total row."""
    lines = ["sector,AEP_GWh,wake_loss_pct"]
    for index, (aep, loss) in enumerate(zip(breakdown.per_sector, breakdown.wake_loss_per_sector), start=1):
        lines.append(f"{index},{format_float(aep)},{format_float(loss)}")
    lines.append(f"total,{format_float(breakdown.total)},{format_float(breakdown.wake_loss_total)}")
    return "\n".join(lines) + "\n"


def comparison_table(initial: AepBreakdown, optimal: AepBreakdown) -> str:
    """Side-by-side sector table: starting layout versus optimized."""
    if len(initial.per_sector) != len(optimal.per_sector):
        raise ValueError("breakdowns cover different sector counts")
    lines = ["sector,initial_AEP_GWh,initial_loss_pct,optimal_AEP_GWh,optimal_loss_pct"]
    rows = zip(initial.per_sector, initial.wake_loss_per_sector, optimal.per_sector, optimal.wake_loss_per_sector)
    for index, (ia, il, oa, ol) in enumerate(rows, start=1):
        lines.append(
            f"{index},{format_float(ia)},{format_float(il)},{format_float(oa)},{format_float(ol)}"
        )
    lines.append(
        "total,"
        f"{format_float(initial.total)},{format_float(initial.wake_loss_total)},"
        f"{format_float(optimal.total)},{format_float(optimal.wake_loss_total)}"
    )
    return "\n".join(lines) + "\n"


def layout_csv(layout) -> str:
    """Layout as CSV with 1-based turbine ids."""
    pts = as_layout(layout)
    lines = ["turbine_id,x_m,y_m"]
    for index, (x, y) in enumerate(pts, start=1):
        lines.append(f"{index},{format_float(x)},{format_float(y)}")
    return "\n".join(lines) + "\n"


def parse_layout_csv(text: str) -> np.ndarray:
    """Inverse of layout_csv; validates the header and row shape."""
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines or lines[0].strip() != "turbine_id,x_m,y_m":
        raise ValueError("layout CSV must start with header 'turbine_id,x_m,y_m'")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 3:
            raise ValueError(f"layout CSV line {lineno}: expected 3 fields, got {len(parts)}")
        try:
            rows.append((float(parts[1]), float(parts[2])))
        except ValueError as exc:
            raise ValueError(f"layout CSV line {lineno}: {exc}") from exc
    if not rows:
        raise ValueError("layout CSV contains no turbines")
    return np.array(rows, dtype=float)


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce a run: inputs, config, versions.

    Timestamps record when the run happened; reruns from the same
    manifest produce byte-identical result files even though the new
    manifest's timestamps differ.
    """

    tool: str
    version: str
    command: str
    inputs: dict
    config: dict
    started_utc: str
    finished_utc: str


def make_manifest(command: str, inputs: dict, config: dict, started: datetime, finished: datetime) -> RunManifest:
    return RunManifest(
        tool=TOOL_NAME,
        version=TOOL_VERSION,
        command=command,
        inputs=dict(inputs),
        config=dict(config),
        started_utc=started.astimezone(timezone.utc).isoformat(),
        finished_utc=finished.astimezone(timezone.utc).isoformat(),
    )


def manifest_to_json(manifest: RunManifest) -> str:
    return json.dumps(asdict(manifest), indent=2, sort_keys=True) + "\n"


def manifest_from_json(text: str) -> RunManifest:
    raw = json.loads(text)
    required = {"tool", "version", "command", "inputs", "config", "started_utc", "finished_utc"}
    missing = required - set(raw)
    if missing:
        raise ValueError(f"manifest missing entries: {sorted(missing)}")
    return RunManifest(**{key: raw[key] for key in required})


def _svg_header(width: float, height: float) -> str:
    return (
        '<svg xmlns="http://www.w3.org/2000/svg" '
        f'viewBox="0 0 {format_float(width)} {format_float(height)}">'
    )


class _Canvas:
    """Maps site coordinates (y up) onto SVG coordinates (y down)."""

    def __init__(self, boundary: FarmBoundary, margin: float) -> None:
        lo = boundary.corners.min(axis=0) - margin
        hi = boundary.corners.max(axis=0) + margin
        self.x0, self.y1 = float(lo[0]), float(hi[1])
        self.width = float(hi[0] - lo[0])
        self.height = float(hi[1] - lo[1])

    def point(self, p) -> tuple[float, float]:
        return float(p[0]) - self.x0, self.y1 - float(p[1])

    def path(self, pts) -> str:
        return " ".join(f"{format_float(x)},{format_float(y)}" for x, y in (self.point(p) for p in pts))


def _ray_exit_length(origin: np.ndarray, direction: np.ndarray, boundary: FarmBoundary) -> float:
    # First crossing of the ray with the convex boundary, 0 if it starts
    # on the border heading out.
    best = None
    for (a, b) in boundary.edge_pairs:
        edge = b - a
        denom = direction[0] * edge[1] - direction[1] * edge[0]
        if denom == 0.0:
            continue
        rel = a - origin
        s = (rel[0] * edge[1] - rel[1] * edge[0]) / denom
        u = (rel[0] * direction[1] - rel[1] * direction[0]) / denom
        if s > 1e-9 and -1e-9 <= u <= 1.0 + 1e-9:
            best = s if best is None else min(best, s)
    return 0.0 if best is None else float(best)


def layout_svg(
    boundary: FarmBoundary,
    layout,
    spec: TurbineSpec,
    k: float,
    theta: float,
    velocities,
) -> str:
    """Plan view: boundary, rotor discs, wake cones, speed labels.

    theta is the compass direction the wind comes from; each cone opens
    downwind with half-width growing at the decay rate k and is clipped
    where it leaves the site.
    """
    pts = as_layout(layout)
    v = np.asarray(velocities, dtype=float)
    if v.shape != (pts.shape[0],):
        raise ValueError("need one velocity per turbine")
    radius = spec.rotor_radius
    rad = np.deg2rad(theta)
    flow = np.array([-np.sin(rad), -np.cos(rad)])
    side = np.array([-flow[1], flow[0]])
    canvas = _Canvas(boundary, margin=3.0 * radius)
    parts = [
        _svg_header(canvas.width, canvas.height),
        f'<polygon points="{canvas.path(boundary.corners)}" fill="none" stroke="black" stroke-width="4"/>',
    ]
    for p, speed in zip(pts, v):
        length = _ray_exit_length(p, flow, boundary)
        if length > 0.0:
            tip = p + length * flow
            half = radius + k * length
            cone = [p + radius * side, tip + half * side, tip - half * side, p - radius * side]
            parts.append(
                f'<polygon points="{canvas.path(cone)}" fill="steelblue" fill-opacity="0.25" stroke="none"/>'
            )
    for p, speed in zip(pts, v):
        cx, cy = canvas.point(p)
        parts.append(
            f'<circle cx="{format_float(cx)}" cy="{format_float(cy)}" r="{format_float(radius)}" '
            'fill="navy"/>'
        )
        parts.append(
            f'<text x="{format_float(cx + 1.2 * radius)}" y="{format_float(cy - 0.4 * radius)}" '
            f'font-size="{format_float(1.2 * radius)}">{speed:.2f}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def efficiency_svg(counts, grid_efficiency, optimized_efficiency) -> str:
    """Efficiency-versus-turbine-count curves (grid dashed, optimized solid)."""
    ns = np.asarray(counts, dtype=float)
    grid = np.asarray(grid_efficiency, dtype=float)
    opt = np.asarray(optimized_efficiency, dtype=float)
    if not (ns.shape == grid.shape == opt.shape) or ns.size == 0:
        raise ValueError("need matching nonempty count and efficiency arrays")
    width, height, pad = 640.0, 400.0, 60.0
    finite = np.concatenate([grid[np.isfinite(grid)], opt[np.isfinite(opt)]])
    lo = float(finite.min()) - 1.0 if finite.size else 0.0
    hi = float(finite.max()) + 1.0 if finite.size else 100.0
    x_span = max(float(ns.max() - ns.min()), 1.0)

    def sx(n: float) -> float:
        return pad + (n - float(ns.min())) / x_span * (width - 2 * pad)

    def sy(e: float) -> float:
        return height - pad - (e - lo) / (hi - lo) * (height - 2 * pad)

    def polyline(values, dash: str) -> str:
        points = " ".join(
            f"{format_float(sx(n))},{format_float(sy(e))}"
            for n, e in zip(ns, values)
            if np.isfinite(e)
        )
        return f'<polyline points="{points}" fill="none" stroke="black"{dash}/>'

    parts = [
        _svg_header(width, height),
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        polyline(grid, ' stroke-dasharray="8 4"'),
        polyline(opt, ""),
        f'<text x="{width / 2}" y="{height - pad / 3}" font-size="16">turbines</text>',
        f'<text x="{pad / 3}" y="{pad}" font-size="16">eff %</text>',
        f'<text x="{width - 2.6 * pad}" y="{pad}" font-size="14">optimized (solid)</text>',
        f'<text x="{width - 2.6 * pad}" y="{pad + 20}" font-size="14">grid (dashed)</text>',
    ]
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
