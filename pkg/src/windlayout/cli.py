"""Command line front end.

Subcommands: fit-wind, evaluate, optimize, plot, sweep. Every command
writes its outputs plus a run manifest into --out; apart from the
manifest's timestamps, a rerun with identical inputs produces
byte-identical files. Exit codes: 0 success, 2 invalid input,
3 infeasible, 4 solver failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .aep import DEFAULT_DV, expected_aep
from .driver import RunConfig, grid_layout, minimum_distance, optimize_layout, rms_distance
from .geometry import FarmBoundary, is_feasible
from .report import (
    comparison_table,
    efficiency_svg,
    format_float,
    layout_csv,
    layout_svg,
    make_manifest,
    manifest_from_json,
    manifest_to_json,
    parse_layout_csv,
    revenue_meur,
    sector_table,
)
from .seeding import SeedingInfeasible
from .turbine import load_turbine
from .wake import decay_factor, farm_velocities
from .wind_resource import build_rose, load_rose, load_wind_csv, save_rose, sector_center

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3
EXIT_SOLVER = 4

DEFAULT_PRICE_EUR_PER_KWH = 0.15
DEFAULT_COST_EUR_PER_KWH = 0.064


@dataclass(frozen=True)
class FarmConfig:
    """Site description: boundary corners, roughness, energy prices."""

    boundary: FarmBoundary
    z0: float
    price_eur_per_kwh: float
    cost_eur_per_kwh: float


def load_farm(path: str) -> FarmConfig:
    """Parse a farm JSON file: corners, z0_m, optional price/cost."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    try:
        corners = np.asarray(raw["corners"], dtype=float)
        if corners.shape != (4, 2):
            raise ValueError(f"corners must be 4 [x, y] pairs, got shape {corners.shape}")
        boundary = FarmBoundary(corners)
        z0 = float(raw["z0_m"])
        price = float(raw.get("price_eur_per_kwh", DEFAULT_PRICE_EUR_PER_KWH))
        cost = float(raw.get("cost_eur_per_kwh", DEFAULT_COST_EUR_PER_KWH))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{path}: {exc}") from exc
    if z0 <= 0:
        raise ValueError(f"{path}: z0_m must be positive")
    if price < 0 or cost < 0:
        raise ValueError(f"{path}: prices must be nonnegative")
    return FarmConfig(boundary=boundary, z0=z0, price_eur_per_kwh=price, cost_eur_per_kwh=cost)


def _load_layout_file(path: str) -> np.ndarray:
    try:
        text = Path(path).read_text(encoding="utf-8")
        return parse_layout_csv(text)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc


def _resolve_rose(args: argparse.Namespace, hub_height: float, z0: float):
    """Rose from --rose (precomputed JSON) or fitted from --wind samples."""
    if getattr(args, "rose", None):
        rose = load_rose(args.rose)
        if abs(rose.hub_height - hub_height) > 1e-9:
            raise ValueError(
                f"{args.rose}: rose fitted at hub height {rose.hub_height} m, "
                f"turbine hub is {hub_height} m"
            )
        return rose
    if getattr(args, "wind", None):
        samples = load_wind_csv(args.wind)
        return build_rose(samples, args.sectors, hub_height, z0)
    raise ValueError("provide a wind input: --rose rose.json or --wind samples.csv")


def _input_paths(args: argparse.Namespace) -> dict:
    keys = ("farm", "turbine", "wind", "rose", "layout")
    return {key: getattr(args, key, None) for key in keys if getattr(args, key, None)}


def _write(out_dir: Path, name: str, text: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    target = out_dir / name
    target.write_text(text, encoding="utf-8")
    return target


def _finish_manifest(args: argparse.Namespace, command: str, config: dict, started: datetime) -> str:
    manifest = make_manifest(
        command=command,
        inputs=_input_paths(args),
        config=config,
        started=started,
        finished=datetime.now(timezone.utc),
    )
    return manifest_to_json(manifest)


def cmd_fit_wind(args: argparse.Namespace) -> int:
    started = datetime.now(timezone.utc)
    farm = load_farm(args.farm)
    spec = load_turbine(args.turbine)
    samples = load_wind_csv(args.wind)
    rose = build_rose(samples, args.sectors, spec.hub_height, farm.z0)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_rose(rose, str(out_dir / "rose.json"))
    config = {"sectors": args.sectors}
    _write(out_dir, "manifest.json", _finish_manifest(args, "fit-wind", config, started))
    degenerate = sum(1 for s in rose.sectors if s.degenerate)
    print(
        f"fitted {rose.n_sectors} sectors from {len(samples)} samples"
        + (f" ({degenerate} degenerate)" if degenerate else "")
    )
    print(f"wrote {out_dir / 'rose.json'}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    started = datetime.now(timezone.utc)
    farm = load_farm(args.farm)
    spec = load_turbine(args.turbine)
    rose = _resolve_rose(args, spec.hub_height, farm.z0)
    layout = _load_layout_file(args.layout)

    report = is_feasible(layout, farm.boundary, minimum_distance(spec))
    if not report.feasible:
        print(
            f"layout infeasible: worst constraint {report.constraint} "
            f"(margin {report.worst_margin:.3e})",
            file=sys.stderr,
        )
        return EXIT_INFEASIBLE

    k = decay_factor(spec.hub_height, farm.z0)
    breakdown = expected_aep(layout, spec, rose, k, args.dv)
    out_dir = Path(args.out)
    table_path = _write(out_dir, "sector_table.csv", sector_table(breakdown))
    config = {"dv": args.dv, "sectors": args.sectors}
    _write(out_dir, "manifest.json", _finish_manifest(args, "evaluate", config, started))

    margin = revenue_meur(breakdown.total, farm.price_eur_per_kwh, farm.cost_eur_per_kwh)
    print(f"wrote {table_path}")
    print(f"total AEP: {format_float(breakdown.total)} GWh/yr")
    print(f"wake loss: {format_float(breakdown.wake_loss_total)} %")
    print(
        f"revenue margin: {format_float(margin)} MEUR/yr "
        f"(price {format_float(farm.price_eur_per_kwh)}, "
        f"cost {format_float(farm.cost_eur_per_kwh)} EUR/kWh)"
    )
    return EXIT_OK


def _optimize_config(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        restarts=args.restarts,
        stall_limit=args.stall_limit,
        seed=args.seed,
        worker_count=args.workers,
        dv=args.dv,
    )


def _optimize_config_dict(args: argparse.Namespace, config: RunConfig) -> dict:
    return {
        "n_turbines": args.n_turbines,
        "restarts": config.restarts,
        "stall_limit": config.stall_limit,
        "seed": config.seed,
        "workers": config.worker_count,
        "dv": config.dv,
        "sectors": args.sectors,
    }


def _apply_manifest(args: argparse.Namespace) -> argparse.Namespace:
    """Fill optimize arguments from a previous run's manifest."""
    raw = manifest_from_json(Path(args.from_manifest).read_text(encoding="utf-8"))
    if raw.command != "optimize":
        raise ValueError(f"{args.from_manifest}: manifest records a '{raw.command}' run, not 'optimize'")
    for key, value in raw.inputs.items():
        setattr(args, key, value)
    config = raw.config
    args.n_turbines = int(config["n_turbines"])
    args.restarts = int(config["restarts"])
    args.stall_limit = int(config["stall_limit"])
    args.seed = int(config["seed"])
    args.workers = int(config["workers"])
    args.dv = float(config["dv"])
    args.sectors = int(config["sectors"])
    return args


def cmd_optimize(args: argparse.Namespace) -> int:
    started = datetime.now(timezone.utc)
    if args.from_manifest:
        args = _apply_manifest(args)
    if args.n_turbines is None:
        raise ValueError("--n-turbines is required (or provide --from-manifest)")
    farm = load_farm(args.farm)
    spec = load_turbine(args.turbine)
    rose = _resolve_rose(args, spec.hub_height, farm.z0)
    config = _optimize_config(args)
    config_echo = _optimize_config_dict(args, config)
    out_dir = Path(args.out)

    try:
        outcome = optimize_layout(farm.boundary, spec, rose, args.n_turbines, config)
    except SeedingInfeasible as exc:
        summary = (
            "verdict: infeasible\n"
            f"{exc}\n"
            f"turbines: {args.n_turbines}\n"
            f"minimum spacing: {format_float(minimum_distance(spec))} m\n"
        )
        _write(out_dir, "summary.txt", summary)
        _write(out_dir, "manifest.json", _finish_manifest(args, "optimize", config_echo, started))
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE

    feasibility = is_feasible(outcome.best_layout, farm.boundary, minimum_distance(spec))
    solver_failed = outcome.kkt.status == "numerical-failure" or not feasibility.feasible

    k = decay_factor(spec.hub_height, rose.z0)
    winner = outcome.per_restart[outcome.best_index]
    initial = expected_aep(winner.start_layout, spec, rose, k, config.dv)
    margin = revenue_meur(outcome.best_aep.total, farm.price_eur_per_kwh, farm.cost_eur_per_kwh)
    delta = revenue_meur(
        outcome.best_aep.total - initial.total, farm.price_eur_per_kwh, farm.cost_eur_per_kwh
    )
    summary_lines = [
        f"verdict: {'solver-failure' if solver_failed else 'feasible'}",
        f"turbines: {args.n_turbines}",
        f"restarts run: {outcome.restarts_run} of {config.restarts}",
        f"winning restart: {outcome.best_index}",
        f"initial AEP: {format_float(initial.total)} GWh/yr",
        f"initial wake loss: {format_float(initial.wake_loss_total)} %",
        f"optimized AEP: {format_float(outcome.best_aep.total)} GWh/yr",
        f"optimized wake loss: {format_float(outcome.best_aep.wake_loss_total)} %",
        f"solver status: {outcome.kkt.status}",
        f"kkt residual: {format_float(outcome.kkt.kkt_residual)}",
        f"max constraint violation: {format_float(outcome.kkt.max_violation)}",
        f"iterations: {outcome.kkt.iterations}",
        f"revenue margin: {format_float(margin)} MEUR/yr",
        f"revenue gain over initial: {format_float(delta)} MEUR/yr",
    ]
    _write(out_dir, "summary.txt", "\n".join(summary_lines) + "\n")
    _write(out_dir, "report.csv", comparison_table(initial, outcome.best_aep))
    if feasibility.feasible:
        _write(out_dir, "layout.csv", layout_csv(outcome.best_layout))
    _write(out_dir, "manifest.json", _finish_manifest(args, "optimize", config_echo, started))

    if solver_failed:
        print(
            f"solver failure: status {outcome.kkt.status}, "
            f"worst margin {feasibility.worst_margin:.3e}",
            file=sys.stderr,
        )
        return EXIT_SOLVER
    print(f"wrote {out_dir / 'layout.csv'}")
    print(
        f"optimized AEP {format_float(outcome.best_aep.total)} GWh/yr "
        f"(wake loss {format_float(outcome.best_aep.wake_loss_total)} %), "
        f"kkt residual {format_float(outcome.kkt.kkt_residual)}"
    )
    return EXIT_OK


def cmd_plot(args: argparse.Namespace) -> int:
    started = datetime.now(timezone.utc)
    farm = load_farm(args.farm)
    spec = load_turbine(args.turbine)
    layout = _load_layout_file(args.layout)
    if args.rose:
        n_sectors = load_rose(args.rose).n_sectors
    else:
        n_sectors = args.sectors
    if not (1 <= args.sector <= n_sectors):
        raise ValueError(f"sector must lie in 1..{n_sectors}, got {args.sector}")
    if args.speed < 0:
        raise ValueError("speed must be nonnegative")
    theta = sector_center(args.sector, n_sectors)
    k = decay_factor(spec.hub_height, farm.z0)
    velocities = farm_velocities(layout, spec, k, theta, args.speed)
    svg = layout_svg(farm.boundary, layout, spec, k, theta, velocities)
    out_dir = Path(args.out)
    svg_path = _write(out_dir, "layout.svg", svg)
    config = {"sector": args.sector, "sectors": n_sectors, "speed": args.speed}
    _write(out_dir, "manifest.json", _finish_manifest(args, "plot", config, started))
    print(f"wrote {svg_path}")
    return EXIT_OK


def _sweep_child_seed(base: int, n_t: int, run: int) -> int:
    return int(np.random.SeedSequence([base, n_t, run]).generate_state(1)[0])


def cmd_sweep(args: argparse.Namespace) -> int:
    started = datetime.now(timezone.utc)
    farm = load_farm(args.farm)
    spec = load_turbine(args.turbine)
    rose = _resolve_rose(args, spec.hub_height, farm.z0)
    if args.n_min < 1 or args.n_max < args.n_min:
        raise ValueError("need 1 <= n-min <= n-max")
    if args.runs_per_n < 1:
        raise ValueError("runs-per-n must be at least 1")
    k = decay_factor(spec.hub_height, farm.z0)
    d_min = minimum_distance(spec)
    area_km2 = farm.boundary.area / 1e6

    run_rows = ["n_turbines,run_index,run_seed,aep_gwh,efficiency_pct,rms_m,status"]
    sweep_rows = [
        "n_turbines,capacity_mw_per_km2,grid_efficiency_pct,"
        "optimized_efficiency_pct,aep_q1_gwh,aep_median_gwh,aep_q3_gwh,"
        "rms_q1_m,rms_median_m,rms_q3_m"
    ]
    counts, grid_effs, opt_effs = [], [], []
    for n_t in range(args.n_min, args.n_max + 1):
        grid = grid_layout(farm.boundary, n_t)
        if is_feasible(grid, farm.boundary, d_min).feasible:
            grid_breakdown = expected_aep(grid, spec, rose, k, args.dv)
            grid_eff = 100.0 - grid_breakdown.wake_loss_total
        else:
            grid_eff = float("nan")
        aeps, effs, rmss = [], [], []
        for run in range(args.runs_per_n):
            child = _sweep_child_seed(args.seed, n_t, run)
            config = RunConfig(
                restarts=args.restarts, seed=child, worker_count=args.workers, dv=args.dv
            )
            try:
                outcome = optimize_layout(farm.boundary, spec, rose, n_t, config)
            except SeedingInfeasible:
                run_rows.append(f"{n_t},{run},{child},nan,nan,nan,infeasible")
                continue
            aep = outcome.best_aep.total
            eff = 100.0 - outcome.best_aep.wake_loss_total
            rms = rms_distance(outcome.best_layout)
            aeps.append(aep)
            effs.append(eff)
            rmss.append(rms)
            run_rows.append(
                f"{n_t},{run},{child},{format_float(aep)},{format_float(eff)},"
                f"{format_float(rms)},{outcome.kkt.status}"
            )
        capacity = n_t * spec.rated_power / 1e6 / area_km2
        if aeps:
            aep_q = np.quantile(aeps, [0.25, 0.5, 0.75])
            rms_q = np.quantile(rmss, [0.25, 0.5, 0.75])
            best_eff = max(effs)
            sweep_rows.append(
                f"{n_t},{format_float(capacity)},{format_float(grid_eff)},"
                f"{format_float(best_eff)},"
                + ",".join(format_float(q) for q in aep_q)
                + ","
                + ",".join(format_float(q) for q in rms_q)
            )
        else:
            best_eff = float("nan")
            sweep_rows.append(
                f"{n_t},{format_float(capacity)},{format_float(grid_eff)},nan,nan,nan,nan,nan,nan,nan"
            )
        counts.append(n_t)
        grid_effs.append(grid_eff)
        opt_effs.append(best_eff)

    out_dir = Path(args.out)
    _write(out_dir, "sweep.csv", "\n".join(sweep_rows) + "\n")
    _write(out_dir, "runs.csv", "\n".join(run_rows) + "\n")
    _write(out_dir, "efficiency.svg", efficiency_svg(counts, grid_effs, opt_effs))
    config_echo = {
        "n_min": args.n_min,
        "n_max": args.n_max,
        "runs_per_n": args.runs_per_n,
        "restarts": args.restarts,
        "seed": args.seed,
        "workers": args.workers,
        "dv": args.dv,
        "sectors": args.sectors,
    }
    _write(out_dir, "manifest.json", _finish_manifest(args, "sweep", config_echo, started))
    print(f"wrote {out_dir / 'sweep.csv'} ({len(counts)} turbine counts)")
    return EXIT_OK


def _add_common_inputs(parser: argparse.ArgumentParser, layout: bool = False) -> None:
    parser.add_argument("--farm", required=True, help="farm config JSON (corners, z0_m, prices)")
    parser.add_argument("--turbine", required=True, help="turbine spec JSON")
    if layout:
        parser.add_argument("--layout", required=True, help="layout CSV (turbine_id,x_m,y_m)")


def _add_wind_inputs(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--wind", help="raw measurement CSV (timestamp,v10_ms,direction_deg)")
    group.add_argument("--rose", help="precomputed rose JSON from fit-wind")
    parser.add_argument("--sectors", type=int, default=12, help="sector count when fitting from --wind")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="windlayout",
        description="Wind farm energy estimation and layout optimization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-wind", help="fit a sector wind rose from measurements")
    _add_common_inputs(p)
    p.add_argument("--wind", required=True, help="raw measurement CSV (timestamp,v10_ms,direction_deg)")
    p.add_argument("--sectors", type=int, default=12)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_fit_wind)

    p = sub.add_parser("evaluate", help="sector AEP table for a fixed layout")
    _add_common_inputs(p, layout=True)
    _add_wind_inputs(p)
    p.add_argument("--dv", type=float, default=DEFAULT_DV, help="quadrature step, m/s")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("optimize", help="multistart layout optimization")
    _add_common_inputs(p)
    _add_wind_inputs(p)
    p.add_argument("--n-turbines", type=int, default=None)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--stall-limit", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--dv", type=float, default=DEFAULT_DV)
    p.add_argument("--from-manifest", default=None, help="rerun a previous optimize manifest")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("plot", help="SVG wake plan for one sector and speed")
    _add_common_inputs(p, layout=True)
    p.add_argument("--rose", default=None, help="rose JSON, used only for its sector count")
    p.add_argument("--sectors", type=int, default=12, help="sector count when no rose is given")
    p.add_argument("--sector", type=int, required=True, help="1-based sector index")
    p.add_argument("--speed", type=float, default=15.0, help="free-stream speed, m/s")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("sweep", help="optimize a range of turbine counts")
    _add_common_inputs(p)
    _add_wind_inputs(p)
    p.add_argument("--n-min", type=int, required=True)
    p.add_argument("--n-max", type=int, required=True)
    p.add_argument("--runs-per-n", type=int, default=5)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--dv", type=float, default=DEFAULT_DV)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SeedingInfeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
