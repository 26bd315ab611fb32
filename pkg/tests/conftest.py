from __future__ import annotations

import pytest

from schemas import (
    ControllerState,
    EnvelopeConstants,
    ScenarioConfig,
    SlotObservation,
    SpecSeries,
    Trace,
    VirtualBatterySpec,
)


def make_state(queue: float, v: float, env: EnvelopeConstants) -> ControllerState:
    """Controller state with the given queue; the SoC follows from the shift."""
    offset = env.b_min_bar + v * env.p_max + env.b_dis_max
    return ControllerState(soc=queue + offset, queue=queue, v=v, env=env)


def make_trace(price, renewable, demand, spec: VirtualBatterySpec) -> Trace:
    """Trace with one spec repeated over every slot."""
    n = len(price)
    return Trace(
        price=tuple(float(p) for p in price),
        renewable=tuple(float(r) for r in renewable),
        demand=tuple(float(e) for e in demand),
        specs=SpecSeries(specs=(spec,) * n),
    )


@pytest.fixture
def default_env() -> EnvelopeConstants:
    return EnvelopeConstants(b_char_max=200, b_dis_max=200, b_min_bar=2000, b_max_bar=3000, p_max=1.5)


@pytest.fixture
def default_cfg() -> ScenarioConfig:
    return ScenarioConfig()


@pytest.fixture
def unit_spec() -> VirtualBatterySpec:
    return VirtualBatterySpec(b_char=200, b_dis=200, b_min=2000, b_max=3000, alpha=1.0)


@pytest.fixture
def obs_factory(unit_spec):
    def _make(price=1.0, renewable=0.0, demand=0.0, spec=None) -> SlotObservation:
        return SlotObservation(price=price, renewable=renewable, demand=demand, spec=spec or unit_spec)
    return _make


@pytest.fixture
def arbitrage_trace() -> Trace:
    """Two slots, cheap then expensive: buy ahead, discharge later."""
    spec = VirtualBatterySpec(b_char=10, b_dis=10, b_min=0, b_max=10, alpha=1.0)
    return make_trace((1, 2), (0, 0), (5, 5), spec)
