"""
VBatt – Virtual-battery energy procurement simulator.
Command-line entry point.

    python main.py generate  --out DIR
    python main.py simulate  [--trace PATH] [--v V] [--projection on|off]
    python main.py sweep     [--jobs N]
    python main.py oracle    [--trace PATH] [--delta D] [--snap-bounds]
    python main.py aggregate (--tasks PATH | --tcl PATH --tcl-params PATH) --out DIR
    python main.py vmax

Every command accepts --config PATH; with --out DIR the effective config is
written to DIR/config.json next to the results.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from aggregation import load_tasks, load_tcl_inputs, merge_series, shift_nonnegative, tasks_to_vb, tcl_to_vb, write_spec_series
from config import SEED_ENV_VAR, ConfigError, RunConfig, defaults_help, dump_config, resolve_config
from controller import v_max
from harness import cost_trend, realized_envelope, report_summary, run, sweep_v, write_report, write_sweep
from oracle import offline_optimal, write_schedule
from schemas import TclParams, Trace
from scenario import declared_envelope, generate, load_trace, write_trace

logger = logging.getLogger("vbatt")

EXIT_OK = 0
EXIT_DATA = 1
EXIT_USAGE = 2


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------
def _on_off(value: str) -> bool:
    value = value.strip().lower()
    if value not in {"on", "off"}:
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return value == "on"


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run config")
    common.add_argument("--seed", type=int, help=f"RNG seed (overrides {SEED_ENV_VAR} and the config)")
    common.add_argument("--horizon", type=int, help="number of slots T")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--dump-config", action="store_true", help="print the effective config and exit")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("--quiet", action="store_true", help="warnings only, no progress bar")

    controller = argparse.ArgumentParser(add_help=False)
    controller.add_argument("--trace", metavar="PATH", help="trace CSV/XLSX instead of a generated one")
    controller.add_argument("--soc0", type=float, help="initial SoC (default: envelope midpoint)")
    controller.add_argument("--realized-envelope", action="store_true", default=None,
                            help="derive the envelope from the drawn trace, not the configured ranges")

    parser = argparse.ArgumentParser(
        prog="vbatt",
        description="Virtual-battery aggregation and online electricity procurement for data centers.",
        epilog=defaults_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", parents=[common], help="write a synthetic trace CSV")
    gen.set_defaults(handler=_cmd_generate)

    sim = sub.add_parser("simulate", parents=[common, controller], help="run the online controller")
    sim.add_argument("--v", type=float, help="penalty weight V")
    sim.add_argument("--projection", type=_on_off, metavar="on|off", help="clip the SoC into its bounds")
    sim.set_defaults(handler=_cmd_simulate)

    swp = sub.add_parser("sweep", parents=[common, controller], help="average cost against V over seeds")
    swp.add_argument("--projection", type=_on_off, metavar="on|off", help="clip the SoC into its bounds")
    swp.add_argument("--jobs", type=int, help="worker processes")
    swp.set_defaults(handler=_cmd_sweep)

    orc = sub.add_parser("oracle", parents=[common], help="offline optimal schedule by dynamic programming")
    orc.add_argument("--trace", metavar="PATH", help="trace CSV/XLSX instead of a generated one")
    orc.add_argument("--soc0", type=float, help="initial SoC (default: lattice point nearest the midpoint)")
    orc.add_argument("--delta", type=float, help="SoC grid step")
    orc.add_argument("--snap-bounds", action="store_true", default=None,
                     help="accept SoC bounds off the delta grid by keeping the grid points inside them")
    orc.set_defaults(handler=_cmd_oracle)

    agg = sub.add_parser("aggregate", parents=[common], help="aggregate task or TCL inputs into a spec series (one kind per run)")
    agg.add_argument("--tasks", metavar="PATH", help="task table arrival,deadline,max_power,energy")
    agg.add_argument("--tcl", metavar="PATH", help="TCL input table slot,theta_a,r")
    agg.add_argument("--tcl-params", metavar="PATH", help="JSON object with the TclParams fields")
    agg.set_defaults(handler=_cmd_aggregate)

    vmx = sub.add_parser("vmax", parents=[common], help="print V_max for the configured ranges")
    vmx.set_defaults(handler=_cmd_vmax)

    return parser


def _effective_config(args: argparse.Namespace) -> RunConfig:
    overrides = {
        "seed": args.seed,
        "horizon": args.horizon,
        "out_dir": args.out,
    }
    for name in ("v", "soc0", "projection", "delta", "snap_bounds", "jobs", "realized_envelope"):
        overrides[name] = getattr(args, name, None)
    return resolve_config(args.config, **overrides)


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="[%(name)s] %(message)s", stream=sys.stderr, force=True)


def _emit(payload) -> None:
    print(json.dumps(payload, indent=2))


def _out_dir(cfg: RunConfig) -> Optional[Path]:
    if cfg.out_dir is None:
        return None
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "config.json")
    return out


def _trace_arg(args: argparse.Namespace) -> Optional[Trace]:
    if getattr(args, "trace", None):
        return load_trace(args.trace)
    return None


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------
def _cmd_generate(args: argparse.Namespace, cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    if out is None:
        raise ConfigError("generate needs --out")
    trace = generate(cfg.scenario())
    write_trace(trace, out / "trace.csv")
    logger.info("wrote %d slot(s) to %s", trace.horizon, out / "trace.csv")
    return EXIT_OK


def _cmd_simulate(args: argparse.Namespace, cfg: RunConfig) -> int:
    trace = _trace_arg(args)
    if trace is None:
        scenario = cfg.scenario()
        trace = generate(scenario)
        env = realized_envelope(trace) if cfg.realized_envelope else declared_envelope(scenario)
        report = run(trace, cfg.v, soc0=cfg.soc0, projection=cfg.projection, env=env,
                     seed=scenario.seed, config_echo=scenario)
    else:
        report = run(trace, cfg.v, soc0=cfg.soc0, projection=cfg.projection)

    out = _out_dir(cfg)
    if out is not None:
        write_report(report, trace, out)
        if not args.trace:
            write_trace(trace, out / "trace.csv")
    _emit(report_summary(report))
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace, cfg: RunConfig) -> int:
    trace = _trace_arg(args)
    source = trace if trace is not None else cfg.scenario()
    rows = sweep_v(
        source,
        cfg.v_list,
        cfg.seed_list(),
        soc0=cfg.soc0,
        projection=cfg.projection,
        realized=cfg.realized_envelope,
        jobs=cfg.jobs,
        progress=not args.quiet,
    )
    out = _out_dir(cfg)
    if out is not None:
        write_sweep(rows, out / "sweep.csv")
    _emit({
        "rows": [r.model_dump() for r in rows],
        "cost_trend": cost_trend(rows),
        "seeds": cfg.seed_list() if trace is None else None,
    })
    return EXIT_OK


def _cmd_oracle(args: argparse.Namespace, cfg: RunConfig) -> int:
    trace = _trace_arg(args)
    if trace is None:
        trace = generate(cfg.scenario())
    soc0 = cfg.soc0
    if soc0 is None:
        env = realized_envelope(trace)
        soc0 = round(0.5 * (env.b_min_bar + env.b_max_bar) / cfg.delta) * cfg.delta

    solution = offline_optimal(trace, soc0, cfg.delta, snap_bounds=cfg.snap_bounds)
    out = _out_dir(cfg)
    if out is not None:
        write_schedule(solution, trace, out / "schedule.csv")
    _emit({
        "total_cost": solution.total_cost,
        "avg_cost": solution.avg_cost,
        "soc0": soc0,
        "final_soc": solution.soc_path[-1],
        "delta": solution.grid_step,
    })
    return EXIT_OK


def _load_tcl_params(path: str) -> TclParams:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{Path(path).name}: invalid JSON at line {exc.lineno} column {exc.colno}") from exc
    return TclParams.model_validate(data)


def _cmd_aggregate(args: argparse.Namespace, cfg: RunConfig) -> int:
    if not args.tasks and not args.tcl:
        raise ConfigError("aggregate needs --tasks or --tcl")
    if args.tasks and args.tcl:
        raise ConfigError("--tasks and --tcl cannot be merged: TCL batteries dissipate (alpha < 1), task batteries do not")
    if args.tcl and not args.tcl_params:
        raise ConfigError("--tcl needs --tcl-params")
    out = _out_dir(cfg)
    if out is None:
        raise ConfigError("aggregate needs --out")

    series, nominal = [], None
    horizon = args.horizon
    if args.tcl:
        ambient, it_power = load_tcl_inputs(args.tcl)
        tcl_series, nominal = tcl_to_vb(_load_tcl_params(args.tcl_params), ambient, it_power)
        series.append(shift_nonnegative(tcl_series))
        horizon = horizon or tcl_series.horizon
    if args.tasks:
        tasks = load_tasks(args.tasks)
        horizon = horizon or max((t.deadline for t in tasks), default=0)
        series.append(tasks_to_vb(tasks, horizon))

    merged = merge_series(series)
    write_spec_series(merged, out / "specs.csv")
    _emit({
        "horizon": merged.horizon,
        "soc_shift": merged.soc_shift,
        "nominal_power": list(nominal) if nominal is not None else None,
    })
    return EXIT_OK


def _cmd_vmax(args: argparse.Namespace, cfg: RunConfig) -> int:
    _out_dir(cfg)
    print(f"{v_max(declared_envelope(cfg.scenario())):g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entrypoint
# ---------------------------------------------------------------------------
def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    _configure_logging(args)

    try:
        cfg = _effective_config(args)
        if args.dump_config:
            _emit(cfg.model_dump(mode="json"))
            return EXIT_OK
        return args.handler(args, cfg)
    except ConfigError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, FileNotFoundError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
