"""Scenario parameters for the fleet readiness lab.

Defines the component class catalog, fleet-level scenario configuration,
reward weights, and training settings, plus helpers to load hierarchical
key/value scenario files (YAML), apply axis scalings, and fingerprint a
scenario for checkpoint compatibility checks.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml


class ConfigError(ValueError):
    """Raised for malformed or inconsistent configuration input."""


@dataclass(frozen=True)
class ComponentClassParams:
    """Static parameters of one component class."""

    class_id: str
    mfhbf: float              # mean flight hours between failures
    failure_prob: float       # abrupt-shock probability per flight hour
    repair_time_mean: float   # hours
    repair_cost: float        # k$ per repair (parts)
    detection_delay: float    # hours until a fault becomes observable
    predict_lead: float       # flight hours of prognostic warning (0 = none)

    def __post_init__(self):
        if self.mfhbf <= 0:
            raise ConfigError(f"{self.class_id}: mfhbf must be positive")
        if not 0.0 <= self.failure_prob <= 1.0:
            raise ConfigError(f"{self.class_id}: failure_prob outside [0, 1]")
        if self.repair_time_mean <= 0 or self.repair_cost < 0:
            raise ConfigError(f"{self.class_id}: bad repair parameters")


# Reference catalog: avionics, flight controls, powerplant, structure, mechanical.
COMPONENT_CLASSES = (
    ComponentClassParams("AVI", 120.0, 0.10, 24.0, 5.0, 2.0, 0.0),
    ComponentClassParams("FCS", 300.0, 0.10, 24.0, 7.0, 2.0, 0.0),
    ComponentClassParams("POW", 250.0, 0.20, 120.0, 20.0, 3.0, 80.0),
    ComponentClassParams("STR", 500.0, 0.15, 60.0, 15.0, 3.0, 100.0),
    ComponentClassParams("MEC", 100.0, 0.20, 36.0, 10.0, 2.0, 40.0),
)

SHOCK_MODES = ("expected", "literal", "off")


def scale_mfhbf(params: ComponentClassParams, intensity: float) -> ComponentClassParams:
    """Return a copy with mfhbf scaled by a failure-intensity factor.

    intensity < 1 shortens component life, > 1 extends it.
    """
    if intensity <= 0:
        raise ConfigError(f"failure intensity must be positive, got {intensity}")
    return dataclasses.replace(params, mfhbf=params.mfhbf * intensity)


@dataclass(frozen=True)
class RewardConfig:
    """Weights of the commander reward signals."""

    availability_weight: float = 2.0     # per-step fleet availability bonus
    failure_penalty_mult: float = 2.0    # mission failure charges mult * reward
    repair_time_weight: float = 0.2      # beta: hours-of-repair weight
    lead_time_weight: float = 0.5        # gamma: order lead-time weight
    holding_weight: float = 1.0          # eta: stock holding weight
    mix_flight: float = 1.0              # tau_F
    mix_maintenance: float = 0.7         # tau_M
    mix_resource: float = 0.2            # tau_R


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete description of one simulated operating scenario."""

    name: str = "nominal"
    seed: int = 0
    n_aircraft: int = 12
    n_bays: int = 6
    n_component_classes: int = 5
    complexity: int = 1             # per-aircraft copies of each component class
    failure_intensity: float = 1.0  # scales every mfhbf
    horizon: int = 720              # hours
    dt: int = 1                     # hours per step
    window: int = 24                # strategic decision period, hours
    missions_per_window: int = 6
    mission_duration: tuple[int, int] = (2, 10)
    mission_aircraft: tuple[int, int] = (2, 8)
    mission_reward_rate: float = 1.0   # k$ per aircraft-hour
    shock_mode: str = "expected"
    initial_stock: int = 3
    stock_capacity: int = 10
    max_order_qty: int = 10
    n_suppliers: int = 3
    supplier_price_mults: tuple[float, ...] = (0.9, 1.0, 1.2)
    supplier_lead_times: tuple[float, ...] = (72.0, 48.0, 24.0)
    labor_rate: float = 0.1            # k$ per repair hour
    repair_sigma_frac: float = 0.2     # repair time std as fraction of mean
    holding_cost_frac: float = 0.005   # per hour, fraction of mid unit price
    rewards: RewardConfig = field(default_factory=RewardConfig)

    def __post_init__(self):
        if self.n_aircraft < 1 or self.n_bays < 1:
            raise ConfigError("fleet needs at least one aircraft and one bay")
        if not 1 <= self.n_component_classes <= len(COMPONENT_CLASSES):
            raise ConfigError(
                f"n_component_classes must be in 1..{len(COMPONENT_CLASSES)}")
        if self.complexity < 1:
            raise ConfigError("complexity must be >= 1")
        if self.failure_intensity <= 0:
            raise ConfigError("failure_intensity must be positive")
        if self.horizon < 1 or self.dt != 1:
            raise ConfigError("horizon must be >= 1 and dt fixed at 1 hour")
        if self.window < 2 or self.window > self.horizon:
            raise ConfigError("window must be in 2..horizon")
        if self.horizon % self.window != 0:
            raise ConfigError("horizon must be a multiple of the window")
        if self.shock_mode not in SHOCK_MODES:
            raise ConfigError(f"shock_mode must be one of {SHOCK_MODES}")
        lo, hi = self.mission_duration
        if not 1 <= lo <= hi:
            raise ConfigError("bad mission_duration range")
        lo, hi = self.mission_aircraft
        if not 1 <= lo <= hi:
            raise ConfigError("bad mission_aircraft range")
        if len(self.supplier_price_mults) != self.n_suppliers:
            raise ConfigError("one price multiplier per supplier required")
        if len(self.supplier_lead_times) != self.n_suppliers:
            raise ConfigError("one lead time per supplier required")
        if self.initial_stock < 0 or self.stock_capacity < 1:
            raise ConfigError("bad stock settings")
        if self.initial_stock > self.stock_capacity:
            raise ConfigError("initial_stock exceeds stock_capacity")
        if self.max_order_qty < 1:
            raise ConfigError("max_order_qty must be >= 1")

    def component_classes(self) -> tuple[ComponentClassParams, ...]:
        """Effective per-class parameters after failure-intensity scaling."""
        base = COMPONENT_CLASSES[: self.n_component_classes]
        return tuple(scale_mfhbf(p, self.failure_intensity) for p in base)

    def components_per_aircraft(self) -> int:
        return self.n_component_classes * self.complexity

    def n_windows(self) -> int:
        return self.horizon // self.window

    def unit_price(self, class_index: int, supplier: int) -> float:
        """Unit price of a spare at a 1-based supplier index."""
        base = COMPONENT_CLASSES[class_index].repair_cost
        return base * self.supplier_price_mults[supplier - 1]

    def holding_cost(self, class_index: int) -> float:
        """Holding cost per unit per hour (fraction of the mid unit price)."""
        mid = sorted(self.supplier_price_mults)[len(self.supplier_price_mults) // 2]
        return self.holding_cost_frac * COMPONENT_CLASSES[class_index].repair_cost * mid


@dataclass(frozen=True)
class TrainConfig:
    """Training-run settings shared by all methods."""

    epochs: int = 500
    curriculum: bool = True
    curriculum_breaks: tuple[float, float] = (0.2, 0.5)
    checkpoint_every: int = 0      # 0 = final checkpoint only
    eval_episodes: int = 10
    per_alpha: float = 0.6
    per_beta0: float = 0.4
    per_epsilon: float = 0.01
    eps_start: float = 1.0
    eps_min: float = 0.01
    eps_decay: float = 0.995

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        a, b = self.curriculum_breaks
        if not 0.0 <= a <= b <= 1.0:
            raise ConfigError("curriculum_breaks must satisfy 0 <= a <= b <= 1")


# ---------------------------------------------------------------------------
# Named built-in scenarios

def nominal_scenario(seed: int = 0) -> ScenarioConfig:
    return ScenarioConfig(name="nominal", seed=seed)


def mini_scenario(seed: int = 0) -> ScenarioConfig:
    """Desk-scale smoke scenario: 4 aircraft, 2 bays, 96 h horizon."""
    return ScenarioConfig(name="mini", seed=seed, n_aircraft=4, n_bays=2, horizon=96)


BUILTIN_SCENARIOS = {"nominal": nominal_scenario, "mini": mini_scenario}

BUILTIN_TRAIN = {
    "nominal": TrainConfig(),
    "mini": TrainConfig(epochs=50, checkpoint_every=0),
}


# ---------------------------------------------------------------------------
# Serialization

_TUPLE_FIELDS = {
    "mission_duration": int,
    "mission_aircraft": int,
    "supplier_price_mults": float,
    "supplier_lead_times": float,
    "curriculum_breaks": float,
}


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["rewards"] = dataclasses.asdict(cfg.rewards)
    for key in _TUPLE_FIELDS:
        if key in d:
            d[key] = list(d[key])
    return d


def _build(cls, data: dict, context: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{context}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if key in _TUPLE_FIELDS and isinstance(value, (list, tuple)):
            cast = _TUPLE_FIELDS[key]
            value = tuple(cast(v) for v in value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{context}: {exc}") from exc


def scenario_from_dict(data: dict) -> ScenarioConfig:
    data = dict(data)
    rewards = data.pop("rewards", None)
    cfg_kwargs = data
    if rewards is not None:
        cfg_kwargs["rewards"] = _build(RewardConfig, rewards, "rewards")
    return _build(ScenarioConfig, cfg_kwargs, "scenario")


def train_from_dict(data: dict) -> TrainConfig:
    return _build(TrainConfig, dict(data), "train")


def load_config_file(path: str | Path) -> tuple[ScenarioConfig, TrainConfig]:
    """Load a scenario file: top-level `scenario:` and optional `train:` maps.

    A scenario may set `base: <name>` to start from a built-in and override
    individual fields.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    unknown = set(raw) - {"scenario", "train"}
    if unknown:
        raise ConfigError(f"{path}: unknown top-level sections {sorted(unknown)}")

    sc_data = dict(raw.get("scenario") or {})
    base_name = sc_data.pop("base", None)
    if base_name is not None:
        if base_name not in BUILTIN_SCENARIOS:
            raise ConfigError(f"{path}: unknown base scenario '{base_name}'")
        merged = scenario_to_dict(BUILTIN_SCENARIOS[base_name]())
        merged.update(sc_data)
        sc_data = merged
    scenario = scenario_from_dict(sc_data)

    tr_data = raw.get("train") or {}
    if tr_data:
        train = train_from_dict(tr_data)
    else:
        train = BUILTIN_TRAIN.get(scenario.name, TrainConfig())
    return scenario, train


def resolve_scenario(spec: str, overrides: dict | None = None) -> tuple[ScenarioConfig, TrainConfig]:
    """Resolve a scenario by built-in name or file path, applying overrides.

    Precedence: built-in defaults < file values < explicit overrides.
    """
    if spec in BUILTIN_SCENARIOS:
        scenario = BUILTIN_SCENARIOS[spec]()
        train = BUILTIN_TRAIN[spec]
    else:
        scenario, train = load_config_file(spec)
    if overrides:
        sc_over = {k: v for k, v in overrides.items()
                   if k in {f.name for f in dataclasses.fields(ScenarioConfig)}}
        tr_over = {k: v for k, v in overrides.items()
                   if k in {f.name for f in dataclasses.fields(TrainConfig)}}
        leftover = set(overrides) - set(sc_over) - set(tr_over)
        if leftover:
            raise ConfigError(f"unknown override keys {sorted(leftover)}")
        if sc_over:
            merged = scenario_to_dict(scenario)
            merged.update(sc_over)
            scenario = scenario_from_dict(merged)
        if tr_over:
            merged = dataclasses.asdict(train)
            merged.update(tr_over)
            train = train_from_dict(merged)
    return scenario, train


def scenario_fingerprint(cfg: ScenarioConfig) -> str:
    """Stable digest of everything that affects network shapes and dynamics.

    Seed and display name are excluded so a checkpoint can be evaluated on
    fresh seeds of the same scenario.
    """
    data = scenario_to_dict(cfg)
    data.pop("seed", None)
    data.pop("name", None)
    blob = json.dumps(data, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
