import numpy as np
import pytest

from conftest import make_state
from controller import (
    CASE_CHARGE,
    CASE_DISCHARGE,
    CASE_EITHER,
    advance,
    cost_gap_bound,
    dispatch,
    dispatch_case,
    drift_constant,
    init_state,
    p3_objective,
    project,
    v_max,
)
from oracles import p3_brute_force
from schemas import DispatchAction, EnvelopeConstants, SlotObservation, VirtualBatterySpec
from vb_core import check_feasible, step_soc


def flows(action: DispatchAction) -> tuple:
    return tuple(round(x, 9) for x in (action.r_e, action.r_b, action.g_e, action.g_b, action.b_e))


# ---------------------------------------------------------------------------
# V_max and constants
# ---------------------------------------------------------------------------
def test_v_max_of_default_scenario(default_env):
    assert v_max(default_env) == 400


def test_v_max_zero_numerator():
    env = EnvelopeConstants(b_char_max=200, b_dis_max=200, b_min_bar=2000, b_max_bar=2400, p_max=1.5)
    assert v_max(env) == 0


def test_v_max_is_homogeneous(default_env):
    doubled = EnvelopeConstants(b_char_max=400, b_dis_max=400, b_min_bar=4000, b_max_bar=6000, p_max=1.5)
    assert v_max(doubled) == pytest.approx(2 * v_max(default_env))


def test_v_max_too_tight():
    env = EnvelopeConstants(b_char_max=200, b_dis_max=200, b_min_bar=2000, b_max_bar=2300, p_max=1.5)
    with pytest.raises(ValueError, match="envelope too tight for any V"):
        v_max(env)


@pytest.mark.parametrize("b_char, b_dis, expected", [(200, 200, 20000), (0, 0, 0), (100, 200, 20000)])
def test_drift_constant(b_char, b_dis, expected):
    env = EnvelopeConstants(b_char_max=b_char, b_dis_max=b_dis, b_min_bar=0, b_max_bar=1, p_max=1)
    assert drift_constant(env) == expected


def test_cost_gap_bound(default_env):
    assert cost_gap_bound(default_env, 400) == pytest.approx(50)


# ---------------------------------------------------------------------------
# State
# ---------------------------------------------------------------------------
def test_init_state_shift(default_env):
    assert init_state(2500, 10, default_env).queue == pytest.approx(285)
    assert init_state(2000, 0, default_env).queue == pytest.approx(-200)
    assert init_state(3000, 400, default_env).queue == pytest.approx(200)


@pytest.mark.parametrize("soc0", [1999, 3001])
def test_init_state_outside_envelope(default_env, soc0):
    with pytest.raises(ValueError, match="initial SoC outside guaranteed envelope"):
        init_state(soc0, 10, default_env)


def test_advance(default_env):
    state = init_state(2500, 10, default_env)
    assert advance(state, DispatchAction(g_e=100)) == state

    up = advance(state, DispatchAction(g_b=30, r_b=20))
    assert up.queue == pytest.approx(335)
    assert up.soc == pytest.approx(2550)

    back = advance(up, DispatchAction(b_e=50))
    assert back.soc == pytest.approx(state.soc)
    assert back.queue == pytest.approx(state.queue)


def test_queue_shift_is_constant_along_a_trajectory(default_env):
    rng = np.random.default_rng(1)
    state = init_state(2500, 100, default_env)
    gap = state.queue - state.soc
    for _ in range(500):
        if rng.random() < 0.5:
            action = DispatchAction(g_b=rng.uniform(0, 100), r_b=rng.uniform(0, 100))
        else:
            action = DispatchAction(b_e=rng.uniform(0, 200))
        state = advance(state, action)
        assert state.queue - state.soc == pytest.approx(gap, abs=1e-6)


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------
def test_discharge_case(default_env, obs_factory):
    state = make_state(100, 10, default_env)
    obs = obs_factory(price=1, renewable=100, demand=500)
    action = dispatch(state, obs)
    assert dispatch_case(state, obs) == CASE_DISCHARGE
    assert flows(action) == (100, 0, 200, 0, 200)
    assert action.cost(obs.price) == pytest.approx(200)


def test_charge_case(default_env, obs_factory):
    state = make_state(-500, 100, default_env)
    obs = obs_factory(price=1, renewable=150, demand=300)
    action = dispatch(state, obs)
    assert dispatch_case(state, obs) == CASE_CHARGE
    assert flows(action) == (0, 150, 300, 50, 0)
    assert action.cost(obs.price) == pytest.approx(350)


def test_either_case_prefers_renewable_charging(default_env, obs_factory):
    state = make_state(-5, 10, default_env)
    obs = obs_factory(price=1, renewable=100, demand=50)
    action = dispatch(state, obs)
    assert dispatch_case(state, obs) == CASE_EITHER
    assert flows(action) == (50, 50, 0, 0, 0)
    assert p3_objective(state, obs, action) == pytest.approx(-750)
    discharge = DispatchAction(r_e=50)
    assert p3_objective(state, obs, discharge) == pytest.approx(-500)


def test_either_case_discharges_when_short(default_env, obs_factory):
    state = make_state(-5, 10, default_env)
    obs = obs_factory(price=1, renewable=0, demand=500)
    action = dispatch(state, obs)
    assert action.b_e == pytest.approx(200)
    assert action.charge == 0


def test_nothing_to_do(default_env, obs_factory):
    state = make_state(100, 10, default_env)
    action = dispatch(state, obs_factory(price=1, renewable=0, demand=0))
    assert flows(action) == (0, 0, 0, 0, 0)


def test_case_boundaries(default_env, obs_factory):
    obs = obs_factory(price=1)
    assert dispatch_case(make_state(-10, 10, default_env), obs) == CASE_CHARGE
    assert dispatch_case(make_state(0, 10, default_env), obs) == CASE_EITHER


def test_dispatch_rejects_dissipation(default_env, obs_factory):
    lossy = VirtualBatterySpec(b_char=200, b_dis=200, b_min=2000, b_max=3000, alpha=0.9)
    with pytest.raises(ValueError, match="lossless"):
        dispatch(make_state(0, 10, default_env), obs_factory(spec=lossy))


def _random_slots(rng, n, env, demand_range):
    """(state, obs) pairs with queues spread over all three cases."""
    for _ in range(n):
        v = rng.uniform(10, 400)
        price = rng.uniform(0.5, 1.5)
        spec = VirtualBatterySpec(
            b_char=rng.uniform(100, 200),
            b_dis=rng.uniform(100, 200),
            b_min=rng.uniform(1000, 2000),
            b_max=rng.uniform(3000, 4000),
        )
        obs = SlotObservation(
            price=price,
            renewable=rng.uniform(0, 3000),
            demand=rng.uniform(*demand_range),
            spec=spec,
        )
        q = rng.uniform(-2.0 * v * price, 300.0)
        yield make_state(q, v, env), obs


def test_dispatch_matches_brute_force(default_env):
    rng = np.random.default_rng(20240601)
    slots = list(_random_slots(rng, 1000, default_env, (10000, 20000)))
    slots += list(_random_slots(rng, 500, default_env, (0, 3000)))
    seen = set()

    for state, obs in slots:
        action = dispatch(state, obs)
        case = dispatch_case(state, obs)
        seen.add(case)

        w = state.queue + state.v * obs.price
        slack = 2.0 * (abs(w) + abs(state.queue) + state.v * obs.price)
        objective = p3_objective(state, obs, action)
        best = p3_brute_force(state, obs)
        assert objective <= best + 1e-6 * max(1.0, abs(best))
        assert objective >= best - slack

        if case == CASE_CHARGE:
            assert action.b_e == 0
        if case == CASE_DISCHARGE:
            assert action.g_b == 0 and action.r_b == 0

        assert action.r_e + action.b_e + action.g_e == pytest.approx(obs.demand)
        assert action.r_e + action.r_b <= obs.renewable + 1e-9
        assert not (action.charge > 1e-9 and action.b_e > 1e-9)
        assert [v for v in check_feasible(obs.spec, step_soc(state.soc, action.charge, action.b_e), action)
                if v.kind.value not in ("soc_lower", "soc_upper")] == []

    assert seen == {CASE_CHARGE, CASE_EITHER, CASE_DISCHARGE}


# ---------------------------------------------------------------------------
# Projection
# ---------------------------------------------------------------------------
def test_project_leaves_feasible_action(default_env, obs_factory):
    state = init_state(2500, 10, default_env)
    action = DispatchAction(g_e=100, g_b=100)
    assert project(state, obs_factory(demand=100), action) == action


def test_project_clips_grid_charging_first(default_env, obs_factory):
    state = init_state(2950, 10, default_env)
    action = DispatchAction(g_e=100, g_b=100)
    clipped = project(state, obs_factory(demand=100), action)
    assert clipped.g_b == pytest.approx(50)
    assert clipped.r_b == 0


def test_project_clips_to_the_envelope_inside_slot_bounds(default_env, obs_factory):
    # the slot allows 3050, the envelope band stops at b_max_bar = 3000
    wide = VirtualBatterySpec(b_char=200, b_dis=200, b_min=1000, b_max=3500)
    state = init_state(2950, 10, default_env)
    action = DispatchAction(g_e=100, g_b=100)
    obs = obs_factory(demand=100, spec=wide)
    assert check_feasible(wide, 3050, action) == []
    clipped = project(state, obs, action)
    assert clipped.g_b == pytest.approx(50)
    assert state.soc + clipped.net == pytest.approx(3000)


def test_project_clips_renewable_after_grid(default_env, obs_factory):
    state = init_state(2950, 10, default_env)
    action = DispatchAction(r_b=80, g_b=40, g_e=100)
    clipped = project(state, obs_factory(renewable=80, demand=100), action)
    assert clipped.g_b == 0
    assert clipped.r_b == pytest.approx(50)


def test_project_moves_discharge_to_grid(default_env, obs_factory):
    state = init_state(2050, 10, default_env)
    action = DispatchAction(b_e=200, g_e=300)
    clipped = project(state, obs_factory(demand=500), action)
    assert clipped.b_e == pytest.approx(50)
    assert clipped.g_e == pytest.approx(450)
    assert clipped.r_e + clipped.b_e + clipped.g_e == pytest.approx(500)


def test_projected_actions_are_feasible(default_env):
    rng = np.random.default_rng(77)
    for state, obs in _random_slots(rng, 300, default_env, (0, 20000)):
        if not default_env.b_min_bar <= state.soc <= default_env.b_max_bar:
            state = init_state(rng.uniform(2000, 3000), state.v, default_env)
        action = project(state, obs, dispatch(state, obs))
        b_next = step_soc(state.soc, action.charge, action.b_e)
        assert check_feasible(obs.spec, b_next, action) == []
        assert action.r_e + action.b_e + action.g_e == pytest.approx(obs.demand)
