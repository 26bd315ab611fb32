"""
VBatt – Offline benchmarks over a fully known trace.

  * greedy_baseline  – no battery: renewable first, grid for the rest.
  * offline_optimal  – backward induction over (slot, SoC) with the SoC on a
                       delta-lattice; exact minimum over lattice trajectories.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path

import numpy as np

from datasets import write_table
from schemas import EPS, DispatchAction, OfflineSolution, Trace

logger = logging.getLogger(__name__)

SCHEDULE_COLUMNS = ("slot", "price", "demand", "renewable", "r_e", "r_b", "g_e", "g_b", "b_e", "soc", "cost")

# A candidate must beat the incumbent by this much to replace it, so ties keep the smaller move.
_TIE_TOL = 1e-9


def greedy_baseline(trace: Trace) -> float:
    """Total cost with the battery left idle."""
    total = 0.0
    for price, renewable, demand in zip(trace.price, trace.renewable, trace.demand):
        r_e = min(renewable, demand)
        total += price * (demand - r_e)
    return total


def _transition_flows(renewable: float, demand: float, delta_soc: float) -> tuple[float, float, float, float, float]:
    """
    Cheapest (r_e, r_b, g_e, g_b, b_e) achieving a net SoC change.

    Renewable is used before grid for both charging and demand; a change is
    either a charge or a discharge, so complementarity holds by construction.
    """
    if delta_soc > 0:
        r_b = min(renewable, delta_soc)
        r_e = min(renewable - r_b, demand)
        return r_e, r_b, demand - r_e, delta_soc - r_b, 0.0
    b_e = -delta_soc
    rest = demand - b_e
    r_e = min(renewable, rest)
    return r_e, 0.0, rest - r_e, 0.0, b_e


def _on_lattice(x: float, delta: float) -> bool:
    k = round(x / delta)
    return abs(k * delta - x) <= 1e-9 * max(1.0, abs(x))


def offline_optimal(
    trace: Trace,
    soc0: float,
    delta: float,
    soc_final_min: float | None = None,
    snap_bounds: bool = False,
) -> OfflineSolution:
    """
    Hindsight-optimal schedule with the SoC restricted to multiples of *delta*.

    Slot t's spec bounds the SoC at the end of slot t. With *soc_final_min*
    the terminal SoC must not fall below it. Every b_min / b_max must lie on
    the lattice; *snap_bounds* instead keeps the lattice points inside each
    slot's bounds, which can only raise the reported cost.

    Raises
    ------
    ValueError – if delta <= 0, soc0 / soc_final_min / a slot bound is off the
    lattice ("grid misalignment") or no lattice trajectory is feasible.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if not _on_lattice(soc0, delta) or (soc_final_min is not None and not _on_lattice(soc_final_min, delta)):
        raise ValueError("grid misalignment")

    horizon = trace.horizon
    specs = trace.specs.specs
    if not snap_bounds:
        for t, s in enumerate(specs):
            if not (_on_lattice(s.b_min, delta) and _on_lattice(s.b_max, delta)):
                raise ValueError(
                    f"grid misalignment: slot {t} bounds [{s.b_min:g}, {s.b_max:g}] are not multiples of delta={delta:g}"
                )

    lo = min([soc0] + [s.b_min for s in specs])
    hi = max([soc0] + [s.b_max for s in specs])
    k_lo = math.ceil(lo / delta - 1e-9)
    k_hi = math.floor(hi / delta + 1e-9)
    k_lo = min(k_lo, round(soc0 / delta))
    k_hi = max(k_hi, round(soc0 / delta))
    levels = np.arange(k_lo, k_hi + 1) * delta
    n = len(levels)
    logger.info("offline DP: %d slots x %d SoC levels (delta=%g)", horizon, n, delta)

    value = np.zeros(n)
    if soc_final_min is not None:
        value[levels < soc_final_min - EPS] = np.inf
    policy = np.zeros((horizon, n), dtype=np.int64)

    for t in range(horizon - 1, -1, -1):
        spec = specs[t]
        price, renewable, demand = trace.price[t], trace.renewable[t], trace.demand[t]
        reachable = (levels >= spec.b_min - EPS) & (levels <= spec.b_max + EPS)
        nxt = np.where(reachable, value, np.inf)

        k_char = math.floor(spec.b_char / delta + 1e-9)
        k_dis = math.floor(min(spec.b_dis, demand) / delta + 1e-9)
        steps = [0]
        for k in range(1, min(max(k_char, k_dis), n - 1) + 1):
            if k <= k_char:
                steps.append(k)
            if k <= k_dis:
                steps.append(-k)

        best = np.full(n, np.inf)
        arg = np.zeros(n, dtype=np.int64)
        for k in steps:
            r_e, r_b, g_e, g_b, b_e = _transition_flows(renewable, demand, k * delta)
            cost = price * (g_e + g_b)
            cand = np.full(n, np.inf)
            if k >= 0:
                cand[:n - k] = cost + nxt[k:]
            else:
                cand[-k:] = cost + nxt[:n + k]
            better = cand < best - _TIE_TOL
            best = np.where(better, cand, best)
            arg = np.where(better, k, arg)
        value = best
        policy[t] = arg

    i = round(soc0 / delta) - k_lo
    if not np.isfinite(value[i]):
        raise ValueError("no feasible schedule on the SoC grid")

    actions: list[DispatchAction] = []
    soc_path = [float(soc0)]
    total = 0.0
    for t in range(horizon):
        k = int(policy[t, i])
        r_e, r_b, g_e, g_b, b_e = _transition_flows(trace.renewable[t], trace.demand[t], k * delta)
        action = DispatchAction(r_e=r_e, r_b=r_b, g_e=g_e, g_b=g_b, b_e=b_e)
        actions.append(action)
        total += action.cost(trace.price[t])
        i += k
        soc_path.append(float(levels[i]))

    return OfflineSolution(
        total_cost=total,
        avg_cost=total / horizon if horizon else 0.0,
        actions=tuple(actions),
        soc_path=tuple(soc_path),
        grid_step=delta,
    )


def write_schedule(solution: OfflineSolution, trace: Trace, path: str | Path) -> None:
    rows = []
    for t, action in enumerate(solution.actions):
        rows.append((
            t, trace.price[t], trace.demand[t], trace.renewable[t],
            action.r_e, action.r_b, action.g_e, action.g_b, action.b_e,
            solution.soc_path[t + 1], action.cost(trace.price[t]),
        ))
    write_table(path, SCHEDULE_COLUMNS, rows)
