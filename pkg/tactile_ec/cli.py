import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from tactile_ec.core.config import load_noise_profile, load_scenario, settings
from tactile_ec.core.exceptions import TactileECError
from tactile_ec.services.experiments import ExperimentOutcome, energy_minimizer_gap, energy_tangential_grid, run_experiment
from tactile_ec.services.results import emit_results, replay

logger = logging.getLogger(__name__)

VARIANTS = ("proposed", "constant-tactile", "no-tactile-energy")


def _scenario_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", type=str, default=None, help="scenario YAML file")
    parser.add_argument("--object", type=str, default=None)
    parser.add_argument("--mu", type=float, default=None)
    parser.add_argument("--trials", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--noise-profile", type=str, default=None, help="YAML noise profile")
    parser.add_argument("--out", type=str, default=None, help="output directory")
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--format", dest="fmt", choices=("csv", "jsonl", "both"), default="both")
    parser.add_argument("--emit-plots-data", action="store_true", help="also write per-step time series")
    parser.add_argument("--store", action="store_true", help="persist the run summary to the database")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tactile-ec", description="Tactile extrinsic-contact experiments")
    parser.add_argument("--log-level", type=str, default=settings.LOG_LEVEL)
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run one experiment protocol")
    run.add_argument("protocol", choices=("point", "multi", "force-eval"))
    run.add_argument("--variant", choices=VARIANTS, default=None)
    _scenario_flags(run)

    ablate = commands.add_parser("ablate", help="point protocol for every controller variant")
    _scenario_flags(ablate)

    grid = commands.add_parser("grid", help="energy / tangential force study around a point contact")
    grid.add_argument("--offset", type=float, default=1.5e-3)
    grid.add_argument("--span", type=float, default=10.0, help="grid half-width in degrees")
    grid.add_argument("--points", type=int, default=9)
    _scenario_flags(grid)

    rep = commands.add_parser("replay", help="recompute summary tables from a log")
    rep.add_argument("log", type=str)
    rep.add_argument("--out", type=str, default=None, help="write the summary CSV here")

    serve = commands.add_parser("serve", help="start the HTTP API")
    serve.add_argument("--host", type=str, default=settings.HOST)
    serve.add_argument("--port", type=int, default=settings.PORT)
    return parser


def _load(args, **extra):
    overrides = {
        "object": args.object,
        "mu": args.mu,
        "trials": args.trials,
        "seed": args.seed,
        **extra,
    }
    if args.noise_profile:
        overrides["noise_profile"] = load_noise_profile(args.noise_profile).model_dump()
    return load_scenario(args.config, **overrides)


def _out_dir(args, scenario, label: Optional[str] = None) -> Path:
    if args.out:
        return Path(args.out)
    name = label or f"{scenario.protocol}-{scenario.object}-{scenario.variant}-mu{scenario.mu:g}-seed{scenario.seed}"
    return Path(settings.OUTPUT_DIR) / name


def _finish(args, outcome: ExperimentOutcome, out_dir: Path):
    emit_results(outcome.rows, out_dir, fmt=args.fmt, steps=outcome.steps, scenario=outcome.scenario,
                 table=outcome.table, emit_plots_data=args.emit_plots_data)
    if args.store:
        from tactile_ec.models.database_manager import DatabaseManager

        DatabaseManager.create_all_tables()
        run_id = DatabaseManager.save_run(outcome, output_dir=str(out_dir))
        print(f"stored run {run_id}")
    failures = sum(1 for t in outcome.trials if t.failure)
    print(f"{len(outcome.trials)} trials ({failures} failed) -> {out_dir}")


def cmd_run(args) -> int:
    scenario = _load(args, protocol=args.protocol, variant=args.variant)
    outcome = run_experiment(scenario, workers=args.workers)
    _finish(args, outcome, _out_dir(args, outcome.scenario))
    return 0


def cmd_ablate(args) -> int:
    base = _out_dir(args, _load(args, protocol="point"), label=None)
    for variant in VARIANTS:
        scenario = _load(args, protocol="point", variant=variant)
        outcome = run_experiment(scenario, workers=args.workers)
        _finish(args, outcome, base / variant)
    return 0


def cmd_grid(args) -> int:
    scenario = _load(args, protocol="point")
    frame = energy_tangential_grid(scenario, offset_target=args.offset, span_deg=args.span, points=args.points)
    out_dir = _out_dir(args, scenario, label=f"grid-{scenario.object}-seed{scenario.seed}")
    out_dir.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out_dir / "energy_grid.csv", index=False, float_format="%.9g", lineterminator="\n")
    print(f"minimum-energy pose tangential excess: {energy_minimizer_gap(frame):.4f}")
    return 0


def cmd_replay(args) -> int:
    summary = replay(args.log)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        summary.to_csv(args.out, index=False, float_format="%.6f", lineterminator="\n")
    else:
        print(summary.to_string(index=False))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("tactile_ec.main:app", host=args.host, port=args.port, reload=settings.DEBUG)
    return 0


COMMANDS = {
    "run": cmd_run,
    "ablate": cmd_ablate,
    "grid": cmd_grid,
    "replay": cmd_replay,
    "serve": cmd_serve,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper())
    try:
        return COMMANDS[args.command](args)
    except TactileECError as e:
        logger.error(str(e))
        return 2


if __name__ == "__main__":
    sys.exit(main())
