"""
Pipeline configuration: defaults < config file (TOML or JSON) < flag overrides.

Layout of a config file::

    seed = 7
    dt = 60.0
    t_sw = 1200.0
    window_len = 21

    [paths]
    output_dir = "out"

    [model]      # ModelConfig fields except window_len/channels/seed
    [train]      # TrainConfig fields except seed
    [synth]      # SynthConfig fields except dt/seed

Seeds: the single ``seed`` fans out to per-stage seeds as
``seed * 10 + k`` with k = 1 synthetic data, 2 rebalancing, 3 weight
initialisation, 4 batch shuffling.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .model import ModelConfig, TrainConfig
from .synthgen import SynthConfig

SEED_COUNTERS = {"synth": 1, "rebalance": 2, "init": 3, "shuffle": 4}


class ConfigError(ValueError):
    pass


def derive_seed(global_seed: int, stage: str) -> int:
    return global_seed * 10 + SEED_COUNTERS[stage]


@dataclass
class Paths:
    output_dir: str = "out"
    sensor_csv: str | None = None
    charge_csv: str | None = None
    model_file: str | None = None

    def resolved(self) -> "Paths":
        out = Path(self.output_dir)
        return Paths(
            output_dir=str(out),
            sensor_csv=self.sensor_csv or str(out / "sensor.csv"),
            charge_csv=self.charge_csv or str(out / "charges.csv"),
            model_file=self.model_file or str(out / "model.json"),
        )


@dataclass
class PipelineConfig:
    paths: Paths = field(default_factory=Paths)
    channels: list[str] = field(default_factory=lambda: ["carbon_potential"])
    dt: float = 60.0
    gap_threshold: float | None = None
    t_sw: float = 1200.0
    window_len: int = 21
    stride: int = 1
    train_ratio: float = 0.8
    near_threshold: float = 0.05
    keep_far_ratio: float = 0.1
    threshold: float = 0.5
    min_separation: float | None = None
    tolerance: float | None = None
    class_epsilon: float = 0.05
    eval_region: str = "test"
    seed: int = 0
    model: dict[str, Any] = field(default_factory=dict)
    train: dict[str, Any] = field(default_factory=dict)
    synth: dict[str, Any] = field(default_factory=dict)

    def validate(self) -> "PipelineConfig":
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not self.t_sw >= 2 * self.dt:
            raise ConfigError("t_sw must be at least 2*dt")
        if self.window_len < 3 or self.window_len % 2 == 0:
            raise ConfigError("window_len must be odd and >= 3")
        if self.stride < 1:
            raise ConfigError("stride must be >= 1")
        if not 0 < self.train_ratio < 1:
            raise ConfigError("train_ratio must lie in (0, 1)")
        if not 0 < self.threshold < 1:
            raise ConfigError("threshold must lie in (0, 1)")
        if self.eval_region not in ("test", "all"):
            raise ConfigError("eval_region must be 'test' or 'all'")
        if not self.channels:
            raise ConfigError("at least one channel is required")
        # constructing the sub-configs runs their own validation
        try:
            self.model_config()
            self.train_config()
            self.synth_config()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        return self

    @property
    def effective_min_separation(self) -> float:
        return self.t_sw if self.min_separation is None else self.min_separation

    @property
    def effective_tolerance(self) -> float:
        return self.t_sw / 2 if self.tolerance is None else self.tolerance

    def model_config(self) -> ModelConfig:
        return ModelConfig(window_len=self.window_len, channels=len(self.channels),
                           seed=derive_seed(self.seed, "init"), **self.model)

    def train_config(self) -> TrainConfig:
        return TrainConfig(seed=derive_seed(self.seed, "shuffle"), **self.train)

    def synth_config(self) -> SynthConfig:
        extra = dict(self.synth)
        for key in ("duration_range", "gap_range", "start_depth_range", "start_width_range",
                    "end_depth_range", "end_width_range", "channels"):
            if key in extra:
                extra[key] = tuple(extra[key])
        extra.setdefault("channels", tuple(self.channels))
        return SynthConfig(dt=self.dt, seed=derive_seed(self.seed, "synth"), **extra)


_SECTIONS = {"model": ModelConfig, "train": TrainConfig, "synth": SynthConfig}
_RESERVED = {"model": {"window_len", "channels", "seed"}, "train": {"seed"},
             "synth": {"dt", "seed"}}


def _check_section(name: str, values: dict) -> None:
    allowed = {f.name for f in fields(_SECTIONS[name])} - _RESERVED[name]
    unknown = set(values) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in [{name}]: {sorted(unknown)}")


def from_dict(d: dict[str, Any]) -> PipelineConfig:
    d = dict(d)
    top = {f.name for f in fields(PipelineConfig)}
    unknown = set(d) - top
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
    paths = d.pop("paths", {}) or {}
    path_keys = {f.name for f in fields(Paths)}
    if set(paths) - path_keys:
        raise ConfigError(f"unknown key(s) in [paths]: {sorted(set(paths) - path_keys)}")
    for name in _SECTIONS:
        _check_section(name, d.get(name, {}) or {})
    try:
        cfg = PipelineConfig(paths=Paths(**paths), **d)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path: str | Path | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    raw = p.read_bytes()
    try:
        if p.suffix.lower() == ".json":
            d = json.loads(raw)
        else:
            d = tomllib.loads(raw.decode("utf-8"))
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {p}: {exc}") from None
    return from_dict(d)


def _coerce(text: str) -> Any:
    try:
        return json.loads(text)
    except ValueError:
        return text


def apply_overrides(cfg: PipelineConfig, overrides: dict[str, Any]) -> PipelineConfig:
    """
    Apply dotted-key overrides such as ``{"train.epochs": 5, "paths.output_dir": "x"}``.

    String values are decoded as JSON when possible, so ``"5"`` becomes 5.
    """
    cfg = replace(cfg, paths=replace(cfg.paths), model=dict(cfg.model),
                  train=dict(cfg.train), synth=dict(cfg.synth))
    top = {f.name for f in fields(PipelineConfig)}
    for key, value in overrides.items():
        if isinstance(value, str):
            value = _coerce(value) if key not in ("paths.output_dir", "paths.sensor_csv",
                                                  "paths.charge_csv", "paths.model_file") else value
        head, _, tail = key.partition(".")
        if not tail:
            if head not in top or head in ("paths", *_SECTIONS):
                raise ConfigError(f"unknown setting {key!r}")
            setattr(cfg, head, value)
        elif head == "paths":
            if tail not in {f.name for f in fields(Paths)}:
                raise ConfigError(f"unknown setting {key!r}")
            setattr(cfg.paths, tail, value)
        elif head in _SECTIONS:
            _check_section(head, {tail: value})
            getattr(cfg, head)[tail] = value
        else:
            raise ConfigError(f"unknown setting {key!r}")
    return cfg


def config_to_dict(cfg: PipelineConfig) -> dict[str, Any]:
    out = {f.name: getattr(cfg, f.name) for f in fields(PipelineConfig)}
    out["paths"] = {f.name: getattr(cfg.paths, f.name) for f in fields(Paths)}
    return out
