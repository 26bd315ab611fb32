"""
VBatt – Online drift-plus-penalty controller.

Per slot:
  1. Observe price, renewable, demand and the virtual queue Q(t).
  2. dispatch  – closed-form minimiser of
        [Q + V*P] * G_b + Q * R_b - [Q + V*P] * B_e - V*P * R_e
     subject to the slot's rate, renewable, demand and complementarity constraints.
  3. project   – optional clipping of the SoC into the guaranteed band.
  4. advance   – apply the net flow to SoC and queue.

The queue is the SoC shifted by b_min_bar + V*p_max + b_dis_max, so state
carries both and they move together.
"""

import logging

from schemas import EPS, ControllerState, DispatchAction, EnvelopeConstants, SlotObservation
from vb_core import step_soc

logger = logging.getLogger(__name__)

CASE_CHARGE = 1       # Q + V*P <= 0: charge at full rate, never discharge
CASE_EITHER = 2       # Q <= 0 < Q + V*P: best of the charge / discharge candidates
CASE_DISCHARGE = 3    # Q > 0: never charge


# ---------------------------------------------------------------------------
# Envelope-derived constants
# ---------------------------------------------------------------------------
def v_max(env: EnvelopeConstants) -> float:
    """
    Largest V for which the SoC provably stays inside its per-slot bounds.

    Raises
    ------
    ValueError – if the envelope is too narrow to absorb one slot of charge
    and one of discharge.
    """
    numerator = env.b_max_bar - env.b_min_bar - env.b_dis_max - env.b_char_max
    if numerator < 0:
        raise ValueError("envelope too tight for any V")
    return numerator / env.p_max


def drift_constant(env: EnvelopeConstants) -> float:
    """B = max(b_char_max^2, b_dis_max^2) / 2, the one-slot drift bound."""
    return 0.5 * max(env.b_char_max ** 2, env.b_dis_max ** 2)


def cost_gap_bound(env: EnvelopeConstants, v: float) -> float:
    """B / V: how far above the optimal time-average cost the controller may settle."""
    return drift_constant(env) / v


def queue_offset(v: float, env: EnvelopeConstants) -> float:
    return env.b_min_bar + v * env.p_max + env.b_dis_max


# ---------------------------------------------------------------------------
# State
# ---------------------------------------------------------------------------
def init_state(soc0: float, v: float, env: EnvelopeConstants) -> ControllerState:
    """
    Raises
    ------
    ValueError – if soc0 lies outside [b_min_bar, b_max_bar].
    """
    if soc0 < env.b_min_bar - EPS or soc0 > env.b_max_bar + EPS:
        raise ValueError("initial SoC outside guaranteed envelope")
    return ControllerState(soc=soc0, queue=soc0 - queue_offset(v, env), v=v, env=env)


def advance(state: ControllerState, action: DispatchAction) -> ControllerState:
    """Apply one slot's net flow; the queue is re-derived so the shift never drifts."""
    soc = step_soc(state.soc, action.charge, action.b_e, 1.0)
    return ControllerState(soc=soc, queue=soc - state.offset, v=state.v, env=state.env)


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------
def p3_objective(state: ControllerState, obs: SlotObservation, action: DispatchAction) -> float:
    q = state.queue
    w = q + state.v * obs.price
    return w * action.g_b + q * action.r_b - w * action.b_e - state.v * obs.price * action.r_e


def dispatch_case(state: ControllerState, obs: SlotObservation) -> int:
    q = state.queue
    if q + state.v * obs.price <= 0:
        return CASE_CHARGE
    if q <= 0:
        return CASE_EITHER
    return CASE_DISCHARGE


def dispatch(state: ControllerState, obs: SlotObservation) -> DispatchAction:
    """
    Closed-form optimal action for the slot.

    Raises
    ------
    ValueError – if the slot's battery is dissipative (alpha != 1).
    """
    spec = obs.spec
    if abs(spec.alpha - 1.0) > EPS:
        raise ValueError("controller requires a lossless battery (alpha = 1)")

    renewable, demand = obs.renewable, obs.demand
    case = dispatch_case(state, obs)

    if case == CASE_CHARGE:
        r_b = min(renewable, spec.b_char)
        r_e = min(renewable - r_b, demand)
        action = DispatchAction(r_e=r_e, r_b=r_b, g_e=demand - r_e, g_b=spec.b_char - r_b, b_e=0.0)

    elif case == CASE_EITHER:
        r_e = min(renewable, demand)
        rest = demand - r_e
        b_e = min(spec.b_dis, rest)
        discharge = DispatchAction(r_e=r_e, r_b=0.0, g_e=rest - b_e, g_b=0.0, b_e=b_e)
        charge = DispatchAction(
            r_e=r_e,
            r_b=min(renewable - r_e, spec.b_char),
            g_e=rest,
            g_b=0.0,
            b_e=0.0,
        )
        # ties go to the charge candidate
        if p3_objective(state, obs, discharge) < p3_objective(state, obs, charge):
            action = discharge
        else:
            action = charge

    else:
        b_e = min(spec.b_dis, demand)
        rest = demand - b_e
        r_e = min(renewable, rest)
        action = DispatchAction(r_e=r_e, r_b=0.0, g_e=rest - r_e, g_b=0.0, b_e=b_e)

    logger.debug("case %d q=%.3f -> %s", case, state.queue, action)
    return action


# ---------------------------------------------------------------------------
# Projection
# ---------------------------------------------------------------------------
def project(state: ControllerState, obs: SlotObservation, action: DispatchAction) -> DispatchAction:
    """
    Clip an action so the next SoC stays inside the slot's bounds.

    The target band is the slot's [b_min, b_max] intersected with the
    envelope [b_min_bar, b_max_bar], which keeps every later slot reachable
    without exceeding its own rate limits. An action that is feasible for
    the slot alone is therefore still clipped when it would leave the
    envelope, e.g. end above b_max_bar where spec.b_max > b_max_bar; it is
    returned unchanged only when it lands inside the band. Overshoot is removed from g_b
    first, then r_b; undershoot is removed from b_e, with g_e covering the
    freed demand. Should the current SoC already lie outside the band, the
    battery is pushed back as far as the rate limits allow.
    """
    spec, env = obs.spec, state.env
    lo = max(spec.b_min, env.b_min_bar)
    hi = min(spec.b_max, env.b_max_bar)
    if lo > hi:
        lo, hi = spec.b_min, spec.b_max

    r_e, r_b, g_e, g_b, b_e = action.r_e, action.r_b, action.g_e, action.g_b, action.b_e
    b_next = step_soc(state.soc, r_b + g_b, b_e)

    if b_next > hi + EPS:
        excess = b_next - hi
        cut = min(g_b, excess)
        g_b -= cut
        excess -= cut
        cut = min(r_b, excess)
        r_b -= cut
        excess -= cut
        if excess > EPS and r_b + g_b <= EPS:
            # already above the band: discharge in place of grid, then renewable supply
            extra = min(excess, spec.b_dis - b_e, g_e + r_e)
            from_grid = min(extra, g_e)
            g_e -= from_grid
            r_e -= extra - from_grid
            b_e += extra

    elif b_next < lo - EPS:
        shortfall = lo - b_next
        cut = min(b_e, shortfall)
        b_e -= cut
        g_e += cut
        shortfall -= cut
        if shortfall > EPS and b_e <= EPS:
            room = max(spec.b_char - r_b - g_b, 0.0)
            spare = max(obs.renewable - r_e - r_b, 0.0)
            extra_r = min(shortfall, room, spare)
            r_b += extra_r
            extra_g = min(shortfall - extra_r, room - extra_r)
            g_b += max(extra_g, 0.0)

    else:
        return action

    projected = DispatchAction(r_e=r_e, r_b=r_b, g_e=g_e, g_b=g_b, b_e=b_e)
    logger.debug("projected %s -> %s", action, projected)
    return projected
