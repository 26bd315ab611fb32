"""
VBatt – Pydantic value types shared by every module.

All models are frozen: dynamics and controller steps return new values
instead of mutating old ones, so a trajectory is a plain sequence of states.
"""

from collections.abc import Iterator
from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, model_validator

# Absolute tolerance (kWh) for every feasibility comparison.
EPS = 1e-9


class _Value(BaseModel):
    model_config = ConfigDict(frozen=True)


# ---------------------------------------------------------------------------
# Virtual battery
# ---------------------------------------------------------------------------
class VirtualBatterySpec(_Value):
    """Per-slot battery parameters (charge/discharge limits, SoC bounds, dissipation)."""
    b_char: float = Field(..., ge=0, description="Charge-rate limit, kWh per slot.")
    b_dis:  float = Field(..., ge=0, description="Discharge-rate limit, kWh per slot.")
    b_min:  float = Field(..., description="SoC lower bound, kWh.")
    b_max:  float = Field(..., description="SoC upper bound, kWh.")
    alpha:  float = Field(1.0, gt=0, le=1, description="Dissipation rate.")

    @model_validator(mode="after")
    def _bounds_ordered(self):
        if self.b_min > self.b_max:
            raise ValueError(f"b_min ({self.b_min}) exceeds b_max ({self.b_max})")
        return self


class SpecSeries(_Value):
    """Time-indexed battery specification; spec t bounds the SoC reached at the end of slot t."""
    specs:     tuple[VirtualBatterySpec, ...] = ()
    soc_shift: float = 0.0   # constant added to the native SoC to make the bounds nonnegative

    @property
    def horizon(self) -> int:
        return len(self.specs)

    def __len__(self) -> int:
        return len(self.specs)

    def __iter__(self) -> Iterator[VirtualBatterySpec]:  # type: ignore[override]
        return iter(self.specs)

    def __getitem__(self, t: int) -> VirtualBatterySpec:
        return self.specs[t]


class EnvelopeConstants(_Value):
    """Worst-case-over-time battery parameters used by the queue shift and V_max."""
    b_char_max: float = Field(..., ge=0)
    b_dis_max:  float = Field(..., ge=0)
    b_min_bar:  float
    b_max_bar:  float
    p_max:      float = Field(..., gt=0)


class ViolationKind(str, Enum):
    CHARGE_RATE = "charge_rate"
    DISCHARGE_RATE = "discharge_rate"
    SOC_LOWER = "soc_lower"
    SOC_UPPER = "soc_upper"
    NEGATIVE_FLOW = "negative_flow"
    COMPLEMENTARITY = "complementarity"


class Violation(_Value):
    kind:      ViolationKind
    magnitude: float


# ---------------------------------------------------------------------------
# Flexible loads
# ---------------------------------------------------------------------------
class TclParams(_Value):
    """Thermostatically controlled cooling load around a temperature setpoint."""
    theta_r: float = Field(..., description="Setpoint, degC.")
    delta:   float = Field(..., gt=0, description="Tolerance around the setpoint, degC.")
    p_m:     float = Field(..., gt=0, description="Maximum TCL power, kW.")
    b_coef:  float = Field(..., gt=0, description="Temperature drop per kW of TCL power.")
    c_coef:  float = Field(..., ge=0, description="Temperature rise per kW of IT power.")
    alpha:   float = Field(..., gt=0, lt=1, description="Thermal inertia.")


class Task(_Value):
    """Deferrable compute job: runs in [arrival, deadline) at up to max_power."""
    arrival:   int
    deadline:  int
    max_power: float = Field(..., gt=0)
    energy:    float = Field(..., gt=0)

    @model_validator(mode="after")
    def _completable(self):
        if self.arrival >= self.deadline:
            raise ValueError("task arrival must precede its deadline")
        if self.energy > (self.deadline - self.arrival) * self.max_power + EPS:
            raise ValueError("task energy cannot be delivered before the deadline")
        return self


# ---------------------------------------------------------------------------
# Controller
# ---------------------------------------------------------------------------
class DispatchAction(_Value):
    """The five flows of one slot, kWh. Feasibility is checked by vb_core, not here."""
    r_e: float = 0.0   # renewable -> demand
    r_b: float = 0.0   # renewable -> battery
    g_e: float = 0.0   # grid -> demand
    g_b: float = 0.0   # grid -> battery
    b_e: float = 0.0   # battery -> demand

    @property
    def charge(self) -> float:
        return self.g_b + self.r_b

    @property
    def net(self) -> float:
        return self.g_b + self.r_b - self.b_e

    @property
    def grid(self) -> float:
        return self.g_e + self.g_b

    def cost(self, price: float) -> float:
        return price * (self.g_e + self.g_b)


class ControllerState(_Value):
    """SoC B(t) and virtual queue Q(t) = B(t) - b_min_bar - V*p_max - b_dis_max."""
    soc:   float
    queue: float
    v:     float = Field(..., ge=0)
    env:   EnvelopeConstants

    @property
    def offset(self) -> float:
        return self.env.b_min_bar + self.v * self.env.p_max + self.env.b_dis_max

    @model_validator(mode="after")
    def _queue_is_shifted_soc(self):
        expected = self.soc - self.offset
        if abs(self.queue - expected) > 1e-6 * max(1.0, abs(self.soc)):
            raise ValueError(f"queue {self.queue} is not soc shifted by {self.offset}")
        return self


class SlotObservation(_Value):
    """What the controller sees at the start of a slot."""
    price:     float = Field(..., ge=0)
    renewable: float = Field(..., ge=0)
    demand:    float = Field(..., ge=0)
    spec:      VirtualBatterySpec
    r_max:     float | None = None

    @model_validator(mode="after")
    def _renewable_capped(self):
        if self.r_max is not None and self.renewable > self.r_max + EPS:
            raise ValueError(f"renewable {self.renewable} exceeds r_max {self.r_max}")
        return self


# ---------------------------------------------------------------------------
# Scenarios and traces
# ---------------------------------------------------------------------------
Range = tuple[float, float]


class ScenarioConfig(_Value):
    horizon:         int = Field(720, gt=0)
    seed:            int = Field(0, ge=0, lt=2**64)
    price_range:     Range = (0.5, 1.5)
    demand_range:    Range = (10000.0, 20000.0)
    renewable_range: Range = (0.0, 3000.0)
    b_char_range:    Range = (100.0, 200.0)
    b_dis_range:     Range = (100.0, 200.0)
    b_min_range:     Range = (1000.0, 2000.0)
    b_max_range:     Range = (3000.0, 4000.0)
    r_max:           float = 3000.0

    @model_validator(mode="after")
    def _ranges_consistent(self):
        for name in ("price_range", "demand_range", "renewable_range",
                     "b_char_range", "b_dis_range", "b_min_range", "b_max_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name}: lower end {lo} exceeds upper end {hi}")
        for name in ("price_range", "demand_range", "renewable_range", "b_char_range", "b_dis_range"):
            if getattr(self, name)[0] < 0:
                raise ValueError(f"{name}: values must be nonnegative")
        if self.renewable_range[1] > self.r_max:
            raise ValueError("renewable_range upper end exceeds r_max")
        if self.b_min_range[1] > self.b_max_range[0]:
            raise ValueError("b_min_range upper end exceeds b_max_range lower end")
        return self


class Trace(_Value):
    """Price, renewable and demand series with the per-slot battery specs."""
    price:     tuple[float, ...]
    renewable: tuple[float, ...]
    demand:    tuple[float, ...]
    specs:     SpecSeries
    r_max:     float | None = None

    @model_validator(mode="after")
    def _aligned(self):
        n = len(self.price)
        if not (len(self.renewable) == len(self.demand) == len(self.specs) == n):
            raise ValueError("trace series have unequal lengths")
        for t in range(n):
            if self.price[t] < 0:
                raise ValueError(f"negative price at slot {t}")
            if self.demand[t] < 0:
                raise ValueError(f"negative demand at slot {t}")
            if self.renewable[t] < 0:
                raise ValueError(f"negative renewable at slot {t}")
            if self.r_max is not None and self.renewable[t] > self.r_max + EPS:
                raise ValueError(f"renewable exceeds r_max at slot {t}")
        return self

    @property
    def horizon(self) -> int:
        return len(self.price)

    def observation(self, t: int) -> SlotObservation:
        return SlotObservation(
            price=self.price[t],
            renewable=self.renewable[t],
            demand=self.demand[t],
            spec=self.specs[t],
            r_max=self.r_max,
        )


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------
class OfflineSolution(_Value):
    total_cost: float
    avg_cost:   float
    actions:    tuple[DispatchAction, ...]
    soc_path:   tuple[float, ...]   # horizon + 1 values, soc_path[0] = soc0
    grid_step:  float


class SocViolation(_Value):
    slot:      int
    bound:     str      # "lower" | "upper"
    magnitude: float


class SimReport(_Value):
    avg_cost:              float
    total_cost:            float
    soc_series:            tuple[float, ...]   # horizon + 1 values, index 0 is the initial SoC
    queue_series:          tuple[float, ...]
    violation_log:         tuple[SocViolation, ...] = ()
    v:                     float
    v_max:                 float | None = None
    seed:                  int | None = None
    config_echo:           ScenarioConfig | None = None
    generator_name:        str | None = None
    actions:               tuple[DispatchAction, ...] = ()
    costs:                 tuple[float, ...] = ()
    cases:                 tuple[int, ...] = ()
    projected_slots:       int = 0
    structural_violations: int = 0
    greedy_cost:           float = 0.0
    gap_bound:             float | None = None   # B / V


class SweepRow(_Value):
    v:                float
    mean_cost:        float
    std_cost:         float
    violations_total: int
