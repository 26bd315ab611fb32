"""
VBatt – Flexible load aggregation into virtual batteries.

Two load classes map onto the same VirtualBatterySpec:
  * TCL fleets (cooling)       – tcl_to_vb
  * deadline-constrained tasks – tasks_to_vb
and any number of equal-dissipation batteries merge into one (merge / merge_series).
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from datasets import parse_float, parse_int, read_table, write_table
from schemas import EPS, SpecSeries, Task, TclParams, VirtualBatterySpec

logger = logging.getLogger(__name__)

TASK_COLUMNS = ("arrival", "deadline", "max_power", "energy")
TCL_COLUMNS = ("slot", "theta_a", "r")
SPEC_COLUMNS = ("slot", "b_char", "b_dis", "b_min", "b_max", "alpha")


# ---------------------------------------------------------------------------
# TCL fleets
# ---------------------------------------------------------------------------
def tcl_soc_bound(params: TclParams) -> float:
    """Half-width of the TCL SoC window, delta / ((1 - alpha) * b)."""
    return params.delta / ((1.0 - params.alpha) * params.b_coef)


def tcl_soc(params: TclParams, theta: float) -> float:
    """SoC of a room at temperature *theta*; theta = theta_r maps to 0."""
    return (params.theta_r - theta) / ((1.0 - params.alpha) * params.b_coef)


def tcl_to_vb(
    params: TclParams,
    ambient: Sequence[float],
    it_power: Sequence[float],
) -> tuple[SpecSeries, tuple[float, ...]]:
    """
    Virtual battery of a TCL around its nominal power p_0(t).

    p_0(t) = (theta_a(t) + c * r(t) - theta_r) / b holds the room at the
    setpoint; the battery charges by cooling harder than p_0 and discharges
    by cooling less.

    Raises
    ------
    ValueError – on unequal series lengths, or when p_0(t) falls outside [0, p_m].
    """
    if len(ambient) != len(it_power):
        raise ValueError("ambient and IT power series have unequal lengths")

    bound = tcl_soc_bound(params)
    specs: list[VirtualBatterySpec] = []
    nominal: list[float] = []
    for t, (theta_a, r) in enumerate(zip(ambient, it_power)):
        p0 = (theta_a + params.c_coef * r - params.theta_r) / params.b_coef
        if p0 < -EPS or p0 > params.p_m + EPS:
            raise ValueError(f"nominal power out of range at slot {t}")
        p0 = min(max(p0, 0.0), params.p_m)
        nominal.append(p0)
        specs.append(VirtualBatterySpec(
            b_char=params.p_m - p0,
            b_dis=p0,
            b_min=-bound,
            b_max=bound,
            alpha=params.alpha,
        ))
    return SpecSeries(specs=tuple(specs)), tuple(nominal)


# ---------------------------------------------------------------------------
# Deadline-constrained tasks
# ---------------------------------------------------------------------------
def task_window(tasks: Sequence[Task], horizon: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Aggregate rate limit and SoC window of a task set.

    Returns
    -------
    (u_max, soc_lower, soc_upper) – u_max has *horizon* entries; the SoC
    window has horizon + 1 entries, one per instant t = 0..horizon, where
    SoC is the cumulative energy delivered before t.

    Raises
    ------
    ValueError – if a deadline lies beyond the horizon.
    """
    t = np.arange(horizon + 1)
    u_max = np.zeros(horizon + 1)
    lower = np.zeros(horizon + 1)
    upper = np.zeros(horizon + 1)

    for task in tasks:
        if task.deadline > horizon or task.arrival < 0:
            raise ValueError("task exceeds horizon")
        a, d, cap, energy = task.arrival, task.deadline, task.max_power, task.energy
        done = d <= t
        active = (a <= t) & (t < d)
        u_max += np.where(active, cap, 0.0)
        lower += np.where(done, energy, np.where(active, np.maximum(energy - (d - t) * cap, 0.0), 0.0))
        upper += np.where(done, energy, np.where(active, np.minimum(energy, (t - a) * cap), 0.0))

    return u_max[:horizon], lower, upper


def tasks_to_vb(tasks: Sequence[Task], horizon: int) -> SpecSeries:
    """Task set as a lossless, charge-only battery; spec t bounds the SoC at t + 1."""
    u_max, lower, upper = task_window(tasks, horizon)
    specs = tuple(
        VirtualBatterySpec(
            b_char=float(u_max[t]),
            b_dis=0.0,
            b_min=float(lower[t + 1]),
            b_max=float(upper[t + 1]),
            alpha=1.0,
        )
        for t in range(horizon)
    )
    return SpecSeries(specs=specs)


# ---------------------------------------------------------------------------
# Merging
# ---------------------------------------------------------------------------
def merge(specs: Sequence[VirtualBatterySpec]) -> VirtualBatterySpec:
    """
    Sum of batteries sharing one dissipation rate.

    Raises
    ------
    ValueError – on an empty list or mixed dissipation rates.
    """
    if not specs:
        raise ValueError("nothing to merge")
    alpha = specs[0].alpha
    if any(not math.isclose(s.alpha, alpha, rel_tol=0.0, abs_tol=1e-12) for s in specs):
        raise ValueError("dissipation mismatch")

    return VirtualBatterySpec(
        b_char=sum(s.b_char for s in specs),
        b_dis=sum(s.b_dis for s in specs),
        b_min=sum(s.b_min for s in specs),
        b_max=sum(s.b_max for s in specs),
        alpha=alpha,
    )


def merge_series(series: Sequence[SpecSeries]) -> SpecSeries:
    """Slot-wise merge of equally long spec series."""
    if not series:
        raise ValueError("nothing to merge")
    horizon = series[0].horizon
    if any(s.horizon != horizon for s in series):
        raise ValueError("horizon mismatch")

    merged = tuple(merge([s.specs[t] for s in series]) for t in range(horizon))
    return SpecSeries(specs=merged, soc_shift=sum(s.soc_shift for s in series))


def shift_nonnegative(series: SpecSeries) -> SpecSeries:
    """
    Translate the SoC bounds so the lowest bound is zero.

    The shift is recorded in soc_shift. It commutes with the dynamics only
    for alpha = 1.
    """
    if not series.specs:
        return series
    shift = -min(s.b_min for s in series.specs)
    if shift <= 0:
        return series
    if any(s.alpha != 1.0 for s in series.specs):
        logger.warning("shifting a dissipative battery; the shift is exact only for alpha = 1")

    shifted = tuple(s.model_copy(update={"b_min": s.b_min + shift, "b_max": s.b_max + shift})
                    for s in series.specs)
    return SpecSeries(specs=shifted, soc_shift=series.soc_shift + shift)


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------
def load_tasks(path: str | Path) -> list[Task]:
    """Task set from a table with header arrival,deadline,max_power,energy."""
    source = f"{Path(path).name}: "
    tasks = []
    for row in read_table(path, TASK_COLUMNS):
        try:
            tasks.append(Task(
                arrival=parse_int(row, "arrival", source),
                deadline=parse_int(row, "deadline", source),
                max_power=parse_float(row, "max_power", source),
                energy=parse_float(row, "energy", source),
            ))
        except ValueError as e:
            if str(e).startswith(source):
                raise
            raise ValueError(f"{source}row {row[0]}: {e}") from e
    return tasks


def load_tcl_inputs(path: str | Path) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Ambient temperature and IT power series from a table with header slot,theta_a,r."""
    name = Path(path).name
    rows = read_table(path, TCL_COLUMNS)
    if not rows:
        raise ValueError(f"{name}: no data rows")

    source = f"{name}: "
    entries = []
    for row in rows:
        entries.append((parse_int(row, "slot", source),
                        parse_float(row, "theta_a", source),
                        parse_float(row, "r", source)))
    entries.sort(key=lambda e: e[0])
    slots = [e[0] for e in entries]
    if slots != list(range(len(slots))):
        raise ValueError(f"{name}: slots must be 0..{len(slots) - 1} without gaps")
    return tuple(e[1] for e in entries), tuple(e[2] for e in entries)


def write_spec_series(series: SpecSeries, path: str | Path) -> None:
    write_table(
        path,
        SPEC_COLUMNS,
        ((t, s.b_char, s.b_dis, s.b_min, s.b_max, s.alpha) for t, s in enumerate(series.specs)),
    )
