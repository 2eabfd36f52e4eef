"""Scenario configuration: JSON document <-> ScenarioConfig."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .errors import ConfigError

CONTROLLER_MODES = ("nominal", "ff", "both")


@dataclass(frozen=True)
class AgentsConfig:
    n_agents: int = 3
    comm_range: float = 25.0
    g: float = 9.81
    tau: float = 0.5


@dataclass(frozen=True)
class PlumeConfig:
    n_samples: int = 200
    mean: tuple[float, float] = (30.0, 30.0)
    sigma: float = 6.0
    domain: tuple[float, float, float, float] = (0.0, 0.0, 100.0, 100.0)
    field: str = "waypoint"
    speed: float = 0.75
    waypoints: tuple[tuple[float, float], ...] = ((70.0, 30.0), (70.0, 70.0), (30.0, 70.0), (30.0, 30.0))
    switch_radius: float = 1.0
    rigid: bool = True
    velocity: tuple[float, float] = (0.0, 0.0)
    gain: float = 0.0
    center: tuple[float, float] = (50.0, 50.0)
    v_max: float | None = None


@dataclass(frozen=True)
class ControllerConfig:
    mode: str = "both"
    r_scale: float = 1e-6
    receding: bool = False
    k_nearest: int = 5
    radius: float = 15.0
    beta_min: float = 1e-4


@dataclass(frozen=True)
class HorizonConfig:
    H: int = 15
    dt: float = 0.4
    steps: int = 1000


@dataclass(frozen=True)
class WeightsConfig:
    gamma: float = 0.03
    sigma_c: float = 1.5


@dataclass(frozen=True)
class OutputConfig:
    snapshot_every: int = 100
    settle_fraction: float = 0.2


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    agents: AgentsConfig = field(default_factory=AgentsConfig)
    plume: PlumeConfig = field(default_factory=PlumeConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    horizon: HorizonConfig = field(default_factory=HorizonConfig)
    weights: WeightsConfig = field(default_factory=WeightsConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def with_overrides(self, *, seed=None, mode=None, steps=None, receding=None,
                       r_scale=None) -> "ScenarioConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=int(seed))
        ctrl = cfg.controller
        if mode is not None:
            ctrl = replace(ctrl, mode=mode)
        if receding is not None:
            ctrl = replace(ctrl, receding=bool(receding))
        if r_scale is not None:
            ctrl = replace(ctrl, r_scale=float(r_scale))
        cfg = replace(cfg, controller=ctrl)
        if steps is not None:
            cfg = replace(cfg, horizon=replace(cfg.horizon, steps=int(steps)))
        cfg.validate()
        return cfg

    def validate(self) -> None:
        a, p, c, h, w, o = self.agents, self.plume, self.controller, self.horizon, self.weights, self.output
        checks = [
            (a.n_agents >= 1, "agents.n_agents must be >= 1"),
            (a.comm_range >= 0, "agents.comm_range must be >= 0"),
            (a.g > 0 and a.tau > 0, "agents.g and agents.tau must be positive"),
            (p.n_samples >= 1, "plume.n_samples must be >= 1"),
            (p.sigma >= 0, "plume.sigma must be >= 0"),
            (p.domain[2] > p.domain[0] and p.domain[3] > p.domain[1], "plume.domain must be (xmin, ymin, xmax, ymax)"),
            (p.field in ("waypoint", "vortex", "constant"), f"unknown plume.field {p.field!r}"),
            (p.speed >= 0, "plume.speed must be >= 0"),
            (c.mode in CONTROLLER_MODES, f"controller.mode must be one of {CONTROLLER_MODES}"),
            (c.r_scale > 0, "controller.r_scale must be positive"),
            (c.k_nearest >= 1, "controller.k_nearest must be >= 1"),
            (c.radius > 0, "controller.radius must be positive"),
            (c.beta_min >= 0, "controller.beta_min must be >= 0"),
            (h.H >= 1, "horizon.H must be >= 1"),
            (h.dt > 0, "horizon.dt must be positive"),
            (h.steps >= 0, "horizon.steps must be >= 0"),
            (0 <= w.gamma <= 1, "weights.gamma must be in [0, 1]"),
            (w.sigma_c > 0, "weights.sigma_c must be positive"),
            (o.snapshot_every >= 0, "output.snapshot_every must be >= 0"),
            (0 < o.settle_fraction < 1, "output.settle_fraction must be in (0, 1)"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


_SECTIONS = {
    "agents": AgentsConfig,
    "plume": PlumeConfig,
    "controller": ControllerConfig,
    "horizon": HorizonConfig,
    "weights": WeightsConfig,
    "output": OutputConfig,
}


def _tuplify(v):
    if isinstance(v, list):
        return tuple(_tuplify(x) for x in v)
    return v


def _section(cls, data: dict, name: str):
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    try:
        return cls(**{k: _tuplify(v) for k, v in data.items()})
    except TypeError as exc:
        raise ConfigError(f"bad section {name!r}: {exc}") from exc


def config_from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - set(_SECTIONS) - {"seed"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    kwargs: dict[str, Any] = {name: _section(cls, data.get(name, {}), name) for name, cls in _SECTIONS.items()}
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("seed must be an integer")
    cfg = ScenarioConfig(seed=seed, **kwargs)
    cfg.validate()
    return cfg


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(data)
