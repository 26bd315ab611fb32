"""
Reproduce the evaluation runs of the virtual-battery controller.

Designed for batch usage (python -m scripts.reproduce_experiments):
- Prints V_max for the default scenario ranges
- Sweeps V over VBATT_SEEDS seeds and writes sweep.csv (average cost vs V)
- Runs seed 0 at V = 10, 300 and 800 and writes each SoC trajectory
- Compares online, greedy and offline-optimal cost on a short horizon

Environment:
  VBATT_OUT_DIR      output directory (default: <project root>/results)
  VBATT_JOBS         worker processes for the sweep (default: 1)
  VBATT_SEEDS        seeds per V in the sweep (default: 20)
  VBATT_DP_HORIZON   horizon of the offline comparison (default: 48)
"""

from __future__ import annotations

import logging
import math
import os
from pathlib import Path

from config import RunConfig, dump_config
from controller import v_max
from harness import cost_trend, run, run_scenario, sweep_v, write_report, write_sweep
from oracle import greedy_baseline, offline_optimal
from scenario import declared_envelope, generate

logger = logging.getLogger("reproduce")

SOC_RUN_VS = (10.0, 300.0, 800.0)


def _project_root() -> Path:
    # scripts/reproduce_experiments.py -> project root
    return Path(__file__).resolve().parents[1]


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return default
    return int(raw)


def reproduce() -> None:
    out = Path(os.getenv("VBATT_OUT_DIR", str(_project_root() / "results")))
    jobs = _env_int("VBATT_JOBS", 1)
    seeds = _env_int("VBATT_SEEDS", 20)
    dp_horizon = _env_int("VBATT_DP_HORIZON", 48)

    cfg = RunConfig(seeds=seeds, jobs=jobs, out_dir=str(out))
    scenario = cfg.scenario()
    env = declared_envelope(scenario)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "config.json")
    logger.info("Using output directory: %s", out)
    logger.info("V_max = %g", v_max(env))

    logger.info("Sweeping V over %s with %d seed(s)...", list(cfg.v_list), seeds)
    rows = sweep_v(scenario, cfg.v_list, cfg.seed_list(), jobs=jobs, progress=True)
    write_sweep(rows, out / "sweep.csv")
    for row in rows:
        logger.info("V=%-6g mean cost %.2f (std %.2f), %d violation(s)",
                    row.v, row.mean_cost, row.std_cost, row.violations_total)
    logger.info("Spearman rho(cost, V) = %.3f", cost_trend(rows))

    for v in SOC_RUN_VS:
        report = run_scenario(scenario, v)
        write_report(report, generate(scenario), out / f"soc_v{v:g}")
        logger.info("V=%g: SoC in [%.1f, %.1f], %d bound violation(s)",
                    v, min(report.soc_series), max(report.soc_series), len(report.violation_log))

    short = scenario.model_copy(update={"horizon": dp_horizon})
    trace = generate(short)
    soc0 = 0.5 * (env.b_min_bar + env.b_max_bar)
    online = run(trace, 300.0, soc0=soc0, env=env)
    floor = math.floor(online.soc_series[-1])
    offline = offline_optimal(trace, soc0, cfg.delta, soc_final_min=floor, snap_bounds=True)
    logger.info("T=%d: online %.2f, greedy %.2f, offline %.2f (terminal SoC >= %d)",
                dp_horizon, online.total_cost, greedy_baseline(trace), offline.total_cost, floor)
    logger.info("Done.")


def main() -> None:
    logging.basicConfig(level=logging.INFO, format="[%(name)s] %(message)s")
    reproduce()


if __name__ == "__main__":
    main()
