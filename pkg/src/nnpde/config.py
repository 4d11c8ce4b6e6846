"""JSON experiment configuration. Unknown keys are rejected at every level."""
from __future__ import annotations

import json
from dataclasses import MISSING, asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from .grid import SpaceTimeGrid
from .net import ConfigError

SCENARIOS = ("heat", "allen_cahn", "custom")


@dataclass
class GridConfig:
    t_count: int = 33
    x_count: int = 17
    y_count: int = 17

    def __post_init__(self):
        self.build()

    def build(self) -> SpaceTimeGrid:
        try:
            return SpaceTimeGrid(self.t_count, self.x_count, self.y_count)
        except (TypeError, ValueError) as err:
            raise ConfigError(f"invalid grid: {err}") from err


@dataclass
class OptimizerConfig:
    kind: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class ScheduleConfig:
    kind: str = "plateau"
    base_rate: float = 0.01
    dtau: float = 1.0
    factor: float = 0.95
    patience: int = 100
    threshold: float = 1e-4
    patience_decay: bool = False
    min_patience: int = 10


@dataclass
class ZClipConfig:
    enabled: bool = True
    alpha: float = 0.98
    z_threshold: float = 0.4
    warmup: int = 25


@dataclass
class InitConfig:
    c_lo: float = -1.0
    c_hi: float = 1.0


@dataclass
class CustomConfig:
    """Expression strings (see ``nnpde.expr``) for the custom scenario."""

    a11: str = "0.01"
    a12: str = "0"
    a22: str = "0.01"
    b1: str = "0"
    b2: str = "0"
    c: str = "0"
    q: str = "0"
    initial: str = "0.2*sin(4*pi*x)*sin(2*pi*y)"
    target_source: str = "1600*x*(1-2*x)*y**2*(0.2+0.6*t-y)**2*(1-y)**2"


@dataclass
class LimitConfig:
    schedule: str = "robbins_monro"
    base_rate: float = 10.0
    dtau: float = 1.0
    steps: int = 500
    mc_samples: int = 10_000
    second_level: bool = True
    grid: GridConfig = field(default_factory=lambda: GridConfig(9, 9, 9))


@dataclass
class ExperimentConfig:
    scenario: str = "heat"
    grid: GridConfig = field(default_factory=GridConfig)
    n: int = 50
    beta: float = 2 / 3
    activation: str = "tanh"
    epochs: int = 2000
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    zclip: ZClipConfig = field(default_factory=ZClipConfig)
    init: InitConfig = field(default_factory=InitConfig)
    custom: CustomConfig = field(default_factory=CustomConfig)
    limit: LimitConfig = field(default_factory=LimitConfig)
    seed: int = 0
    seeds_for_averaging: int = 5
    n_list: list = field(default_factory=lambda: [10, 50, 200, 1000])
    output_dir: str = "runs/default"
    limit_mode: bool = False
    log_y: bool = True
    jobs: int = 1

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if not 0.5 < self.beta < 1:
            raise ConfigError("beta must lie strictly inside (1/2, 1)")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")

    def to_json(self) -> dict:
        return asdict(self)

    def replace(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'} must be a JSON object")
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where or 'config'}")
    kwargs = {}
    for name, value in data.items():
        sub = _nested_type(cls, name)
        kwargs[name] = _build(sub, value, f"{where}.{name}".lstrip(".")) if sub else value
    try:
        return cls(**kwargs)
    except TypeError as err:
        raise ConfigError(str(err)) from err


_NESTED = {
    (ExperimentConfig, "grid"): GridConfig,
    (ExperimentConfig, "optimizer"): OptimizerConfig,
    (ExperimentConfig, "schedule"): ScheduleConfig,
    (ExperimentConfig, "zclip"): ZClipConfig,
    (ExperimentConfig, "init"): InitConfig,
    (ExperimentConfig, "custom"): CustomConfig,
    (ExperimentConfig, "limit"): LimitConfig,
    (LimitConfig, "grid"): GridConfig,
}


def _nested_type(cls, name) -> Optional[type]:
    return _NESTED.get((cls, name))


def config_from_dict(data: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, data, "")


def load_config(path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return config_from_dict(data)


def parse_grid(text: str) -> GridConfig:
    """``"tx,nx,ny"`` -> GridConfig (time levels first)."""
    try:
        t, x, y = (int(v) for v in text.split(","))
    except ValueError as err:
        raise ConfigError(f"--grid expects three integers 'nt,nx,ny', got {text!r}") from err
    return GridConfig(t, x, y)


def json_schema() -> dict:
    """JSON schema of the config file, derived from the dataclasses."""

    def schema_of(cls):
        props = {}
        for f in fields(cls):
            sub = _nested_type(cls, f.name)
            if sub is not None:
                props[f.name] = schema_of(sub)
                continue
            default = f.default if f.default_factory is MISSING else f.default_factory()
            props[f.name] = {"type": _json_type(default), "default": default}
        return {"type": "object", "properties": props, "additionalProperties": False}

    return {"$schema": "https://json-schema.org/draft/2020-12/schema", **schema_of(ExperimentConfig)}


def _json_type(value) -> str:
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, int):
        return "integer"
    if isinstance(value, float):
        return "number"
    if isinstance(value, list):
        return "array"
    return "string"
