import csv
import json
import math

import numpy as np
import pytest

from conftest import make_trace
from controller import drift_constant, v_max
from harness import cost_trend, realized_envelope, report_summary, run, run_scenario, sweep_v, write_report, write_sweep
from oracle import offline_optimal
from scenario import declared_envelope, generate
from schemas import EPS, ScenarioConfig, SpecSeries, SweepRow, Trace, VirtualBatterySpec
from vb_core import check_feasible

SEEDS = range(20)


def assert_structurally_sound(report, trace):
    """Demand balance, complementarity, nonnegativity, rate limits and the queue shift at every slot."""
    gap = report.queue_series[0] - report.soc_series[0]
    for t, action in enumerate(report.actions):
        obs = trace.observation(t)
        assert action.r_e + action.b_e + action.g_e == pytest.approx(obs.demand, abs=1e-6)
        assert action.r_e + action.r_b <= obs.renewable + 1e-6
        structural = [v for v in check_feasible(obs.spec, report.soc_series[t + 1], action)
                      if v.kind.value not in ("soc_lower", "soc_upper")]
        assert structural == []
        assert report.queue_series[t + 1] - report.soc_series[t + 1] == pytest.approx(gap, abs=1e-6)
    assert report.structural_violations == 0


@pytest.fixture(scope="module")
def default_runs():
    """Seeded default-scenario runs keyed by (v, seed), without projection."""
    runs = {}
    for v in (10.0, 300.0, 800.0):
        for seed in SEEDS:
            runs[v, seed] = run_scenario(ScenarioConfig(seed=seed), v)
    return runs


# ---------------------------------------------------------------------------
# Single runs
# ---------------------------------------------------------------------------
@pytest.mark.parametrize("v", [10.0, 300.0])
def test_no_violations_up_to_v_max(default_runs, v):
    for seed in SEEDS:
        report = default_runs[v, seed]
        assert report.violation_log == ()
        assert_structurally_sound(report, generate(ScenarioConfig(seed=seed)))


def test_violations_beyond_v_max(default_runs):
    assert any(default_runs[800.0, seed].violation_log for seed in SEEDS)
    for seed in SEEDS:
        report = default_runs[800.0, seed]
        for entry in report.violation_log:
            assert entry.bound in ("lower", "upper")
            assert entry.magnitude > EPS


def test_projection_removes_violations_beyond_v_max():
    for seed in range(5):
        cfg = ScenarioConfig(seed=seed)
        report = run_scenario(cfg, 800.0, projection=True)
        assert report.violation_log == ()
        assert_structurally_sound(report, generate(cfg))


def test_report_accounting(default_runs):
    report = default_runs[10.0, 0]
    trace = generate(ScenarioConfig(seed=0))
    recomputed = sum(a.cost(p) for a, p in zip(report.actions, trace.price))
    assert report.total_cost == pytest.approx(recomputed)
    assert report.avg_cost == pytest.approx(report.total_cost / 720)
    assert len(report.soc_series) == len(report.queue_series) == 721
    assert report.seed == 0
    assert report.generator_name == "PCG64"
    assert report.config_echo == ScenarioConfig(seed=0)
    assert report.v_max == 400
    assert report.gap_bound == pytest.approx(2000)


def test_run_is_deterministic():
    trace = generate(ScenarioConfig(horizon=48, seed=4))
    assert run(trace, 50) == run(trace, 50)


def test_idle_trace(unit_spec):
    trace = make_trace([1.2] * 10, [0] * 10, [0] * 10, unit_spec)
    report = run(trace, 10)
    assert report.total_cost == 0
    assert set(report.soc_series) == {2500}


def test_loaded_trace_uses_realized_envelope(unit_spec):
    trace = make_trace([1.0, 1.25], [0, 0], [100, 100], unit_spec)
    env = realized_envelope(trace)
    assert (env.b_min_bar, env.b_max_bar, env.p_max) == (2000, 3000, 1.25)
    report = run(trace, 10)
    assert report.v_max == pytest.approx(480)
    assert report.soc_series[0] == 2500

    summary = report_summary(report)
    assert summary["violations"] == 0
    assert summary["final_soc"] == report.soc_series[-1]
    assert summary["config"] is None and summary["distribution"] is None
    assert "actions" not in summary


def test_all_zero_prices(unit_spec):
    trace = make_trace([0.0] * 3, [0] * 3, [100] * 3, unit_spec)
    report = run(trace, 10)
    assert report.total_cost == 0
    assert report.violation_log == ()
    assert report.soc_series == (2500, 2400, 2300, 2200)


def test_v_must_be_positive(unit_spec):
    trace = make_trace([1.0], [0], [0], unit_spec)
    with pytest.raises(ValueError, match="V must be positive"):
        run(trace, 0)


def test_initial_soc_outside_envelope(unit_spec):
    trace = make_trace([1.0], [0], [0], unit_spec)
    with pytest.raises(ValueError, match="initial SoC outside guaranteed envelope"):
        run(trace, 10, soc0=1500)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------
def test_cost_falls_as_v_grows():
    rows = sweep_v(ScenarioConfig(), [10, 50, 100, 200, 300, 400], list(SEEDS))
    assert [r.v for r in rows] == [10, 50, 100, 200, 300, 400]
    assert cost_trend(rows) < 0
    assert all(r.violations_total == 0 for r in rows)


def test_single_v_sweep_is_the_mean_of_runs():
    cfg = ScenarioConfig(horizon=48)
    rows = sweep_v(cfg, [20], [0, 1, 2])
    costs = [run_scenario(cfg.model_copy(update={"seed": s}), 20).avg_cost for s in (0, 1, 2)]
    assert len(rows) == 1
    assert rows[0].mean_cost == pytest.approx(np.mean(costs))
    assert rows[0].std_cost == pytest.approx(np.std(costs))


def test_sweep_output_independent_of_workers():
    cfg = ScenarioConfig(horizon=24)
    serial = sweep_v(cfg, [100, 10], [0, 1])
    parallel = sweep_v(cfg, [100, 10], [0, 1], jobs=2)
    assert serial == parallel
    assert [r.v for r in serial] == [10, 100]


def test_stable_cases_give_equal_costs():
    # price at the top of its range and a high SoC keep every slot in the discharge case
    spec = VirtualBatterySpec(b_char=100, b_dis=100, b_min=0, b_max=10000)
    trace = make_trace([1.5] * 6, [0] * 6, [50] * 6, spec)
    rows = sweep_v(trace, [10, 20], [0], soc0=9000)
    assert rows[0].mean_cost == pytest.approx(rows[1].mean_cost)


def test_sweep_rejects_empty_inputs():
    with pytest.raises(ValueError, match="empty V list"):
        sweep_v(ScenarioConfig(horizon=4), [], [0])
    with pytest.raises(ValueError, match="empty seed list"):
        sweep_v(ScenarioConfig(horizon=4), [10], [])


def test_cost_trend_needs_two_rows():
    assert math.isnan(cost_trend([SweepRow(v=1, mean_cost=1, std_cost=0, violations_total=0)]))


# ---------------------------------------------------------------------------
# Online against offline
# ---------------------------------------------------------------------------
def _integer_trace(trace: Trace) -> Trace:
    specs = tuple(
        VirtualBatterySpec(b_char=round(s.b_char), b_dis=round(s.b_dis), b_min=round(s.b_min), b_max=round(s.b_max))
        for s in trace.specs.specs
    )
    return Trace(
        price=trace.price,
        renewable=tuple(float(round(r)) for r in trace.renewable),
        demand=tuple(float(round(e)) for e in trace.demand),
        specs=SpecSeries(specs=specs),
        r_max=trace.r_max,
    )


def test_online_cost_against_hindsight():
    horizon, delta = 48, 1.0
    within = 0
    for seed in range(50):
        cfg = ScenarioConfig(horizon=horizon, seed=seed)
        env = declared_envelope(cfg)
        v = v_max(env)
        trace = _integer_trace(generate(cfg))
        online = run(trace, v, soc0=2500, env=env)
        assert_structurally_sound(online, trace)

        final = math.floor(online.soc_series[-1] + 1e-9)
        offline = offline_optimal(trace, 2500, delta, soc_final_min=final)
        assert online.total_cost >= offline.total_cost - 1e-6

        per_slot_gap = (online.total_cost - offline.total_cost) / horizon
        if per_slot_gap <= drift_constant(env) / v + env.p_max * delta:
            within += 1
    assert within >= 45


# ---------------------------------------------------------------------------
# Output files
# ---------------------------------------------------------------------------
def test_write_report(tmp_path):
    cfg = ScenarioConfig(horizon=12, seed=2)
    trace = generate(cfg)
    report = run_scenario(cfg, 10)
    write_report(report, trace, tmp_path)

    summary = json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))
    assert summary["total_cost"] == pytest.approx(report.total_cost)
    assert summary["generator"] == "PCG64"
    assert summary["distribution"] == "iid-uniform"
    assert summary["config"]["seed"] == 2

    with open(tmp_path / "slots.csv", newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert list(rows[0]) == ["slot", "price", "renewable", "demand", "r_e", "r_b", "g_e", "g_b",
                             "b_e", "soc", "queue", "cost"]
    assert len(rows) == 12
    assert float(rows[-1]["soc"]) == report.soc_series[-1]
    assert sum(float(r["cost"]) for r in rows) == pytest.approx(report.total_cost)


def test_write_sweep(tmp_path):
    rows = [SweepRow(v=10, mean_cost=5.5, std_cost=0.5, violations_total=0)]
    write_sweep(rows, tmp_path / "sweep.csv")
    assert (tmp_path / "sweep.csv").read_text(encoding="utf-8") == "v,mean_cost,std_cost,violations_total\n10.0,5.5,0.5,0\n"
