"""
VBatt – Synthetic trace generation and trace file I/O.

Every series is drawn i.i.d. uniform over its configured range from a
numpy PCG64 stream seeded by ScenarioConfig.seed, in the fixed order
price, renewable, demand, b_char, b_dis, b_min, b_max.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from datasets import parse_float, read_table, write_table
from schemas import EnvelopeConstants, ScenarioConfig, SpecSeries, Trace, VirtualBatterySpec
from vb_core import price_bound

GENERATOR_NAME = "PCG64"
DISTRIBUTION = "iid-uniform"

TRACE_COLUMNS = ("slot", "price", "renewable", "demand", "b_char", "b_dis", "b_min", "b_max")


def generate(cfg: ScenarioConfig) -> Trace:
    """Same config, same trace – generation is a pure function of *cfg*."""
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    n = cfg.horizon

    def draw(bounds: tuple[float, float]) -> list[float]:
        lo, hi = bounds
        return rng.uniform(lo, hi, size=n).tolist()

    price = draw(cfg.price_range)
    renewable = draw(cfg.renewable_range)
    demand = draw(cfg.demand_range)
    b_char = draw(cfg.b_char_range)
    b_dis = draw(cfg.b_dis_range)
    b_min = draw(cfg.b_min_range)
    b_max = draw(cfg.b_max_range)

    specs = tuple(
        VirtualBatterySpec(b_char=b_char[t], b_dis=b_dis[t], b_min=b_min[t], b_max=b_max[t], alpha=1.0)
        for t in range(n)
    )
    return Trace(
        price=tuple(price),
        renewable=tuple(renewable),
        demand=tuple(demand),
        specs=SpecSeries(specs=specs),
        r_max=cfg.r_max,
    )


def declared_envelope(cfg: ScenarioConfig) -> EnvelopeConstants:
    """Envelope known a priori from the configured ranges, before any draw."""
    return EnvelopeConstants(
        b_char_max=cfg.b_char_range[1],
        b_dis_max=cfg.b_dis_range[1],
        b_min_bar=cfg.b_min_range[1],
        b_max_bar=cfg.b_max_range[0],
        p_max=price_bound(cfg.price_range[1]),
    )


# ---------------------------------------------------------------------------
# CSV / XLSX
# ---------------------------------------------------------------------------
def write_trace(trace: Trace, path: str | Path) -> None:
    rows = (
        (t, trace.price[t], trace.renewable[t], trace.demand[t], s.b_char, s.b_dis, s.b_min, s.b_max)
        for t, s in enumerate(trace.specs.specs)
    )
    write_table(path, TRACE_COLUMNS, rows)


def load_trace(path: str | Path, r_max: float | None = None) -> Trace:
    """
    Read a trace table (header slot,price,renewable,demand,b_char,b_dis,b_min,b_max).

    Raises
    ------
    ValueError – on missing columns, ragged rows, non-numeric cells,
    negative price/demand, renewable above *r_max*, bad battery bounds,
    slots out of order, or a file without data rows.
    """
    name = Path(path).name
    source = f"{name}: "
    rows = read_table(path, TRACE_COLUMNS)
    if not rows:
        raise ValueError(f"{name}: empty trace (header only)")

    price, renewable, demand, specs = [], [], [], []
    for expected_slot, row in enumerate(rows):
        line_no = row[0]
        values = {key: parse_float(row, key, source) for key in TRACE_COLUMNS}
        if values["slot"] != expected_slot:
            raise ValueError(f"{name}: row {line_no}: expected slot {expected_slot}, got {values['slot']:g}")
        if values["price"] < 0:
            raise ValueError(f"{name}: row {line_no}: negative price {values['price']}")
        if values["demand"] < 0:
            raise ValueError(f"{name}: row {line_no}: negative demand {values['demand']}")
        if values["renewable"] < 0:
            raise ValueError(f"{name}: row {line_no}: negative renewable {values['renewable']}")
        if r_max is not None and values["renewable"] > r_max:
            raise ValueError(f"{name}: row {line_no}: renewable {values['renewable']} exceeds r_max {r_max}")
        try:
            spec = VirtualBatterySpec(
                b_char=values["b_char"],
                b_dis=values["b_dis"],
                b_min=values["b_min"],
                b_max=values["b_max"],
                alpha=1.0,
            )
        except ValueError as e:
            raise ValueError(f"{name}: row {line_no}: invalid battery spec: {e}") from e

        price.append(values["price"])
        renewable.append(values["renewable"])
        demand.append(values["demand"])
        specs.append(spec)

    return Trace(
        price=tuple(price),
        renewable=tuple(renewable),
        demand=tuple(demand),
        specs=SpecSeries(specs=tuple(specs)),
        r_max=r_max,
    )
