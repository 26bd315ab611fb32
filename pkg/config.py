"""
VBatt – Run configuration / JSON-based loader.

A run is fully described by its RunConfig. Every command writes the
effective config (all defaults resolved) next to its results, so any
output can be reproduced from its own artifacts.

Precedence: CLI flag > environment (VBATT_SEED) > config file > default.
"""

import json
import os
from pathlib import Path
from typing import Any, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from schemas import Range, ScenarioConfig

load_dotenv()

SEED_ENV_VAR = "VBATT_SEED"

_SCENARIO_FIELDS = (
    "horizon", "price_range", "demand_range", "renewable_range",
    "b_char_range", "b_dis_range", "b_min_range", "b_max_range", "r_max",
)


class ConfigError(ValueError):
    """Config file or flag could not be turned into a valid RunConfig."""


class RunConfig(BaseModel):
    """Every parameter of a run; unknown keys are rejected."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    # scenario
    horizon:         int   = Field(720, gt=0)
    seed:            int   = Field(0, ge=0, lt=2**64)
    seeds:           int   = Field(20, gt=0, description="Sweep over seed, seed+1, ..., seed+seeds-1.")
    price_range:     Range = (0.5, 1.5)
    demand_range:    Range = (10000.0, 20000.0)
    renewable_range: Range = (0.0, 3000.0)
    b_char_range:    Range = (100.0, 200.0)
    b_dis_range:     Range = (100.0, 200.0)
    b_min_range:     Range = (1000.0, 2000.0)
    b_max_range:     Range = (3000.0, 4000.0)
    r_max:           float = 3000.0

    # controller / oracle
    v:                 float               = Field(10.0, gt=0)
    v_list:            tuple[float, ...]   = (10.0, 50.0, 100.0, 200.0, 300.0, 400.0)
    soc0:              Optional[float]     = None
    projection:        bool                = False
    realized_envelope: bool                = False
    delta:             float               = Field(1.0, gt=0)
    snap_bounds:       bool                = False

    # execution / output
    jobs:    int           = Field(1, ge=1)
    out_dir: Optional[str] = None

    @model_validator(mode="after")
    def _scenario_valid(self):
        if not self.v_list or any(v <= 0 for v in self.v_list):
            raise ValueError("v_list must hold positive values")
        try:
            self.scenario()
        except ValidationError as exc:
            raise ValueError("; ".join(err["msg"] for err in exc.errors())) from exc
        return self

    def scenario(self, seed: Optional[int] = None) -> ScenarioConfig:
        fields = {name: getattr(self, name) for name in _SCENARIO_FIELDS}
        return ScenarioConfig(seed=self.seed if seed is None else seed, **fields)

    def seed_list(self) -> list[int]:
        return [self.seed + i for i in range(self.seeds)]


def _describe(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        key = ".".join(str(p) for p in err["loc"]) or "config"
        parts.append(f"{key}: {err['msg']}")
    return "; ".join(parts)


def _validate(data: dict[str, Any]) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_describe(exc)) from exc


def _env_seed() -> Optional[int]:
    raw = os.getenv(SEED_ENV_VAR)
    if raw is None or not raw.strip():
        return None
    try:
        return int(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"{SEED_ENV_VAR}: not an integer: {raw!r}") from exc


def load_config(path: str | Path) -> RunConfig:
    """
    Load and validate a JSON config file; omitted keys take their defaults.

    Raises
    ------
    FileNotFoundError – if *path* does not exist.
    ConfigError       – on invalid JSON (with line/column) or an invalid value
                        (with the offending key).
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path.name}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path.name}: top level must be a JSON object")
    return _validate(data)


def resolve_config(path: Optional[str | Path] = None, **overrides: Any) -> RunConfig:
    """
    Effective config: file (or defaults), then VBATT_SEED, then non-None *overrides*.
    """
    cfg = load_config(path) if path else RunConfig()
    data = cfg.model_dump()
    env_seed = _env_seed()
    if env_seed is not None:
        data["seed"] = env_seed
    data.update({k: v for k, v in overrides.items() if v is not None})
    return _validate(data)


def dump_config(cfg: RunConfig, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(cfg.model_dump(mode="json"), f, indent=2)
        f.write("\n")


def defaults_help() -> str:
    """Default values, one per line, for the CLI epilog."""
    lines = ["config defaults:"]
    for name, value in RunConfig().model_dump(mode="json").items():
        lines.append(f"  {name:<18} {json.dumps(value)}")
    return "\n".join(lines)
