"""
VBatt – Virtual battery dynamics and feasibility checking.

Every other module goes through these three functions:
  1. step_soc        – B(t+1) = alpha * B(t) + charge - discharge
  2. check_feasible  – tagged list of violated constraints for one slot
  3. envelope        – worst-case constants over a spec series
"""

import logging

from schemas import (
    EPS,
    DispatchAction,
    EnvelopeConstants,
    SpecSeries,
    Violation,
    ViolationKind,
    VirtualBatterySpec,
)

FLOW_FIELDS = ("r_e", "r_b", "g_e", "g_b", "b_e")

# p_max taken when every price is zero; any positive bound satisfies P(t) <= p_max then.
FREE_PRICE_P_MAX = 1.0

logger = logging.getLogger(__name__)


def step_soc(b: float, charge: float, discharge: float, alpha: float = 1.0) -> float:
    """Advance the SoC by one slot. Feasibility is checked separately."""
    return alpha * b + charge - discharge


def check_feasible(spec: VirtualBatterySpec, b_next: float, action: DispatchAction) -> list[Violation]:
    """
    Check one slot against the battery constraints.

    Returns
    -------
    list[Violation] – empty iff the action and the resulting SoC are feasible;
    otherwise one entry per violated constraint with the amount of the excess.
    """
    violations: list[Violation] = []

    for name in FLOW_FIELDS:
        value = getattr(action, name)
        if value < -EPS:
            violations.append(Violation(kind=ViolationKind.NEGATIVE_FLOW, magnitude=-value))

    charge = action.charge
    if charge > spec.b_char + EPS:
        violations.append(Violation(kind=ViolationKind.CHARGE_RATE, magnitude=charge - spec.b_char))
    elif charge < -EPS:
        violations.append(Violation(kind=ViolationKind.CHARGE_RATE, magnitude=-charge))

    if action.b_e > spec.b_dis + EPS:
        violations.append(Violation(kind=ViolationKind.DISCHARGE_RATE, magnitude=action.b_e - spec.b_dis))

    if b_next < spec.b_min - EPS:
        violations.append(Violation(kind=ViolationKind.SOC_LOWER, magnitude=spec.b_min - b_next))
    elif b_next > spec.b_max + EPS:
        violations.append(Violation(kind=ViolationKind.SOC_UPPER, magnitude=b_next - spec.b_max))

    # Mutual exclusion, not a penalty: both sides strictly positive is a violation.
    if charge > EPS and action.b_e > EPS:
        violations.append(Violation(kind=ViolationKind.COMPLEMENTARITY, magnitude=min(charge, action.b_e)))

    return violations


def demand_balance_gap(action: DispatchAction, demand: float) -> float:
    """r_e + b_e + g_e - demand; zero (to EPS) for a balanced slot."""
    return action.r_e + action.b_e + action.g_e - demand


def envelope(series: SpecSeries, p_max: float) -> EnvelopeConstants:
    """
    Worst-case constants of a spec series: max of the rates and of b_min,
    min of b_max; p_max goes through price_bound.

    Raises
    ------
    ValueError – if the series is empty.
    """
    if not series.specs:
        raise ValueError("empty spec series")

    return EnvelopeConstants(
        b_char_max=max(s.b_char for s in series.specs),
        b_dis_max=max(s.b_dis for s in series.specs),
        b_min_bar=max(s.b_min for s in series.specs),
        b_max_bar=min(s.b_max for s in series.specs),
        p_max=price_bound(p_max),
    )


def price_bound(p_max: float) -> float:
    """Price bound for the queue shift; an all-zero price series gets FREE_PRICE_P_MAX."""
    if p_max == 0:
        logger.warning("all prices are zero; using p_max=%g", FREE_PRICE_P_MAX)
        return FREE_PRICE_P_MAX
    return p_max
