"""
VBatt – Simulation harness.

run      – one pass of the online controller over a trace.
sweep_v  – one run per (V, seed), aggregated per V.

Runs are independent, so sweeps fan out over a process pool; aggregation
happens afterwards in one place and orders rows by V, which keeps the
output identical for any number of workers.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats
from tqdm import tqdm

from controller import (
    advance,
    cost_gap_bound,
    dispatch,
    dispatch_case,
    init_state,
    project,
    v_max,
)
from datasets import write_table
from oracle import greedy_baseline
from schemas import (
    EPS,
    EnvelopeConstants,
    ScenarioConfig,
    SimReport,
    SocViolation,
    SweepRow,
    Trace,
    ViolationKind,
)
from scenario import DISTRIBUTION, GENERATOR_NAME, declared_envelope, generate
from vb_core import check_feasible, envelope, step_soc

logger = logging.getLogger(__name__)

SLOT_COLUMNS = ("slot", "price", "renewable", "demand", "r_e", "r_b", "g_e", "g_b", "b_e", "soc", "queue", "cost")
SWEEP_COLUMNS = ("v", "mean_cost", "std_cost", "violations_total")

_SOC_KINDS = {ViolationKind.SOC_LOWER: "lower", ViolationKind.SOC_UPPER: "upper"}


def realized_envelope(trace: Trace) -> EnvelopeConstants:
    return envelope(trace.specs, max(trace.price))


def _safe_v_max(env: EnvelopeConstants) -> float | None:
    try:
        return v_max(env)
    except ValueError:
        return None


# ---------------------------------------------------------------------------
# Single run
# ---------------------------------------------------------------------------
def run(
    trace: Trace,
    v: float,
    soc0: float | None = None,
    projection: bool = False,
    env: EnvelopeConstants | None = None,
    seed: int | None = None,
    config_echo: ScenarioConfig | None = None,
) -> SimReport:
    """
    Drive the controller over *trace*.

    *env* defaults to the envelope realized by the trace; *soc0* defaults to
    the envelope midpoint. SoC-bound violations are logged against each
    slot's own spec, never clipped unless *projection* is on.

    Raises
    ------
    ValueError – if v <= 0 or the controller cannot be initialised.
    """
    if v <= 0:
        raise ValueError("V must be positive")
    if env is None:
        env = realized_envelope(trace)
    if soc0 is None:
        soc0 = 0.5 * (env.b_min_bar + env.b_max_bar)

    limit = _safe_v_max(env)
    if limit is None or v > limit:
        logger.warning("V=%g exceeds V_max=%s; SoC bounds are not guaranteed", v, limit)

    state = init_state(soc0, v, env)
    soc_series = [state.soc]
    queue_series = [state.queue]
    actions, costs, cases = [], [], []
    violations: list[SocViolation] = []
    projected = 0
    structural = 0
    total = 0.0

    for t in range(trace.horizon):
        obs = trace.observation(t)
        cases.append(dispatch_case(state, obs))
        action = dispatch(state, obs)
        if projection:
            clipped = project(state, obs, action)
            if clipped != action:
                projected += 1
            action = clipped

        b_next = step_soc(state.soc, action.charge, action.b_e)
        for violation in check_feasible(obs.spec, b_next, action):
            if violation.kind in _SOC_KINDS:
                violations.append(SocViolation(slot=t, bound=_SOC_KINDS[violation.kind],
                                               magnitude=violation.magnitude))
            else:
                structural += 1
                logger.error("slot %d: %s by %.6g", t, violation.kind.value, violation.magnitude)
        if abs(action.r_e + action.b_e + action.g_e - obs.demand) > EPS * max(1.0, obs.demand):
            structural += 1
            logger.error("slot %d: demand not balanced", t)

        cost = action.cost(obs.price)
        total += cost
        state = advance(state, action)

        actions.append(action)
        costs.append(cost)
        soc_series.append(state.soc)
        queue_series.append(state.queue)

    if violations:
        logger.warning("V=%g: %d SoC-bound violation(s)", v, len(violations))
    if projected:
        logger.info("V=%g: projection clipped %d slot(s)", v, projected)

    horizon = trace.horizon
    return SimReport(
        avg_cost=total / horizon if horizon else 0.0,
        total_cost=total,
        soc_series=tuple(soc_series),
        queue_series=tuple(queue_series),
        violation_log=tuple(violations),
        v=v,
        v_max=limit,
        seed=seed,
        config_echo=config_echo,
        generator_name=GENERATOR_NAME if config_echo is not None else None,
        actions=tuple(actions),
        costs=tuple(costs),
        cases=tuple(cases),
        projected_slots=projected,
        structural_violations=structural,
        greedy_cost=greedy_baseline(trace),
        gap_bound=cost_gap_bound(env, v),
    )


def run_scenario(
    cfg: ScenarioConfig,
    v: float,
    soc0: float | None = None,
    projection: bool = False,
    realized: bool = False,
) -> SimReport:
    """Generate the trace of *cfg* and run it against the declared (or realized) envelope."""
    trace = generate(cfg)
    env = realized_envelope(trace) if realized else declared_envelope(cfg)
    return run(trace, v, soc0=soc0, projection=projection, env=env, seed=cfg.seed, config_echo=cfg)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------
def _sweep_job(args) -> tuple[float, int, float, int]:
    """Module level so the process pool can pickle it."""
    source, v, seed, soc0, projection, realized = args
    if isinstance(source, ScenarioConfig):
        report = run_scenario(source.model_copy(update={"seed": seed}), v, soc0, projection, realized)
    else:
        report = run(source, v, soc0=soc0, projection=projection)
    return v, seed, report.avg_cost, len(report.violation_log)


def sweep_v(
    source: Trace | ScenarioConfig,
    v_list: Sequence[float],
    seeds: Sequence[int],
    soc0: float | None = None,
    projection: bool = False,
    realized: bool = False,
    jobs: int = 1,
    progress: bool = False,
) -> list[SweepRow]:
    """
    Mean and standard deviation of the average cost per V.

    With a ScenarioConfig, each seed generates its own trace; with a fixed
    Trace the seeds are irrelevant and a single run per V is made.
    """
    if not v_list:
        raise ValueError("empty V list")
    if not seeds:
        raise ValueError("empty seed list")
    if isinstance(source, Trace):
        seeds = [0]

    jobs_args = [(source, float(v), int(seed), soc0, projection, realized) for v in v_list for seed in seeds]
    logger.info("sweep: %d V value(s) x %d seed(s), %d worker(s)", len(v_list), len(seeds), jobs)

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            results = list(tqdm(executor.map(_sweep_job, jobs_args), total=len(jobs_args),
                                desc="sweep", disable=not progress))
    else:
        results = [_sweep_job(a) for a in tqdm(jobs_args, desc="sweep", disable=not progress)]

    rows = []
    for v in sorted({float(v) for v in v_list}):
        costs = np.array([r[2] for r in results if r[0] == v])
        violations = sum(r[3] for r in results if r[0] == v)
        rows.append(SweepRow(v=v, mean_cost=float(costs.mean()), std_cost=float(costs.std()),
                             violations_total=int(violations)))
    return rows


def cost_trend(rows: Sequence[SweepRow]) -> float:
    """Spearman rank correlation of mean cost against V (negative: cost falls as V grows)."""
    if len(rows) < 2:
        return float("nan")
    rho, _ = stats.spearmanr([r.v for r in rows], [r.mean_cost for r in rows])
    return float(rho)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------
def report_summary(report: SimReport) -> dict:
    """JSON-ready summary: everything except the per-slot series."""
    return {
        "avg_cost": report.avg_cost,
        "total_cost": report.total_cost,
        "greedy_cost": report.greedy_cost,
        "v": report.v,
        "v_max": report.v_max,
        "gap_bound": report.gap_bound,
        "violations": len(report.violation_log),
        "violation_log": [vl.model_dump() for vl in report.violation_log],
        "projected_slots": report.projected_slots,
        "structural_violations": report.structural_violations,
        "final_soc": report.soc_series[-1],
        "seed": report.seed,
        "generator": report.generator_name,
        "distribution": DISTRIBUTION if report.config_echo is not None else None,
        "config": report.config_echo.model_dump(mode="json") if report.config_echo else None,
    }


def write_report(report: SimReport, trace: Trace, out_dir: str | Path) -> None:
    """summary.json plus slots.csv; the soc/queue columns hold the end-of-slot values."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "summary.json", "w", encoding="utf-8") as f:
        json.dump(report_summary(report), f, indent=2)
        f.write("\n")

    rows = (
        (t, trace.price[t], trace.renewable[t], trace.demand[t],
         a.r_e, a.r_b, a.g_e, a.g_b, a.b_e,
         report.soc_series[t + 1], report.queue_series[t + 1], report.costs[t])
        for t, a in enumerate(report.actions)
    )
    write_table(out_dir / "slots.csv", SLOT_COLUMNS, rows)
    logger.info("wrote %s", out_dir)


def write_sweep(rows: Sequence[SweepRow], path: str | Path) -> None:
    write_table(path, SWEEP_COLUMNS, ((r.v, r.mean_cost, r.std_cost, r.violations_total) for r in rows))
