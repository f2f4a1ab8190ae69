"""
Synthetic furnace streams with a known charge schedule.

The noiseless carbon-potential template is

    cp(t) = baseline + drift_amplitude * sin(2*pi*(t - start_time) / drift_period)
            + plateau_height * sum_c ramp_c(t)
            - sum_c start_depth_c * pulse(t - start_c; start_width_c)
            - sum_c end_depth_c   * pulse(t - end_c;   end_width_c)

with

    ramp_c(t) = 0                                      t < start_c
              = 1 - exp(-(t - start_c) / plateau_rise)  start_c <= t < end_c
              = ramp_c(end_c) * exp(-(t - end_c) / plateau_fall)   t >= end_c

    pulse(u; width) = exp(-u**2 / (2 * (width/4)**2))  u < 0
                    = exp(-u / width)                  u >= 0

so each transient bottoms out exactly at the logged timestamp and recovers
exponentially. Optional ``temperature`` and ``millivolt`` channels reuse the
same ramps and pulses. Gaussian noise (``noise_std`` scaled per channel) is
added last; raw sample times are ``start_time + i*dt`` plus uniform jitter of
at most ``jitter * dt``.

Random streams are independent per purpose: ``default_rng([seed, 0])`` draws
the schedule, ``[seed, 1]`` the timestamp jitter and ``[seed, 2]`` the noise,
so switching noise off leaves the schedule unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ingestion import ChargeEntry, ChargeLog, TimeSeries

CHANNELS = ("carbon_potential", "temperature", "millivolt")
# per-channel noise multiplier relative to carbon potential
_NOISE_SCALE = {"carbon_potential": 1.0, "temperature": 100.0, "millivolt": 250.0}


class SynthConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    n_charges: int = 60
    duration_range: tuple[float, float] = (7200.0, 14400.0)
    gap_range: tuple[float, float] = (1800.0, 7200.0)
    dt: float = 60.0
    jitter: float = 0.1
    noise_std: float = 0.01
    start_depth_range: tuple[float, float] = (0.12, 0.2)
    start_width_range: tuple[float, float] = (180.0, 420.0)
    end_depth_range: tuple[float, float] = (0.1, 0.16)
    end_width_range: tuple[float, float] = (120.0, 300.0)
    baseline: float = 0.8
    drift_amplitude: float = 0.02
    drift_period: float = 86400.0
    plateau_height: float = 0.3
    plateau_rise: float = 1200.0
    plateau_fall: float = 600.0
    start_time: float = 1_600_000_000.0
    horizon: float | None = None
    channels: tuple[str, ...] = ("carbon_potential",)
    seed: int = 0

    def __post_init__(self):
        if self.n_charges < 1:
            raise SynthConfigError("n_charges must be >= 1")
        for name in ("duration_range", "gap_range", "start_depth_range", "start_width_range",
                     "end_depth_range", "end_width_range"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise SynthConfigError(f"{name} must be positive and ordered, got {(lo, hi)}")
        for name in ("dt", "drift_period", "plateau_rise", "plateau_fall"):
            if not getattr(self, name) > 0:
                raise SynthConfigError(f"{name} must be positive")
        if self.noise_std < 0 or self.drift_amplitude < 0:
            raise SynthConfigError("noise_std and drift_amplitude must be >= 0")
        if not 0 <= self.jitter < 0.5:
            raise SynthConfigError("jitter must lie in [0, 0.5) so sample order is preserved")
        unknown = set(self.channels) - set(CHANNELS)
        if unknown or not self.channels:
            raise SynthConfigError(f"channels must be a non-empty subset of {CHANNELS}")

    @property
    def min_horizon(self) -> float:
        """Horizon that fits any draw: every duration and gap at its maximum."""
        return self.gap_range[1] + self.n_charges * (self.duration_range[1] + self.gap_range[1])


@dataclass(frozen=True)
class ChargeSpec:
    charge_id: str
    start_ts: float
    end_ts: float
    start_depth: float
    start_width: float
    end_depth: float
    end_width: float


def draw_schedule(cfg: SynthConfig) -> tuple[list[ChargeSpec], float]:
    """Charge schedule and the horizon (seconds after ``start_time``) it spans."""
    if cfg.horizon is not None and cfg.horizon < cfg.min_horizon:
        raise SynthConfigError(
            f"{cfg.n_charges} charges need a horizon of at least {cfg.min_horizon:g} s, "
            f"got {cfg.horizon:g} s")
    rng = np.random.default_rng([cfg.seed, 0])
    t = cfg.start_time + rng.uniform(*cfg.gap_range)
    specs = []
    for i in range(cfg.n_charges):
        dur = rng.uniform(*cfg.duration_range)
        specs.append(ChargeSpec(
            charge_id=f"c{i + 1:03d}",
            start_ts=float(t),
            end_ts=float(t + dur),
            start_depth=float(rng.uniform(*cfg.start_depth_range)),
            start_width=float(rng.uniform(*cfg.start_width_range)),
            end_depth=float(rng.uniform(*cfg.end_depth_range)),
            end_width=float(rng.uniform(*cfg.end_width_range)),
        ))
        t = t + dur + rng.uniform(*cfg.gap_range)
    horizon = cfg.horizon if cfg.horizon is not None else float(t - cfg.start_time)
    return specs, horizon


def pulse(u: np.ndarray, width: float) -> np.ndarray:
    flank = width / 4
    return np.where(u < 0, np.exp(-0.5 * (np.minimum(u, 0) / flank) ** 2),
                    np.exp(-np.maximum(u, 0) / width))


def ramp(t: np.ndarray, spec: ChargeSpec, cfg: SynthConfig) -> np.ndarray:
    rise = 1 - np.exp(-np.maximum(t - spec.start_ts, 0) / cfg.plateau_rise)
    at_end = 1 - np.exp(-(spec.end_ts - spec.start_ts) / cfg.plateau_rise)
    fall = at_end * np.exp(-np.maximum(t - spec.end_ts, 0) / cfg.plateau_fall)
    return np.where(t < spec.start_ts, 0.0, np.where(t < spec.end_ts, rise, fall))


def template_components(t: np.ndarray, specs: list[ChargeSpec], cfg: SynthConfig) -> dict:
    """Noiseless building blocks evaluated at times ``t``."""
    t = np.asarray(t, dtype=np.float64)
    plateau = np.zeros_like(t)
    start_dips = np.zeros_like(t)
    end_dips = np.zeros_like(t)
    for s in specs:
        plateau += ramp(t, s, cfg)
        start_dips += s.start_depth * pulse(t - s.start_ts, s.start_width)
        end_dips += s.end_depth * pulse(t - s.end_ts, s.end_width)
    drift = cfg.drift_amplitude * np.sin(2 * np.pi * (t - cfg.start_time) / cfg.drift_period)
    return {"drift": drift, "plateau": plateau, "start_dips": start_dips, "end_dips": end_dips}


def template(t: np.ndarray, specs: list[ChargeSpec], cfg: SynthConfig) -> np.ndarray:
    """Noiseless channel values, shape ``(len(t), len(cfg.channels))``."""
    comp = template_components(t, specs, cfg)
    cp = cfg.baseline + comp["drift"] + cfg.plateau_height * comp["plateau"] \
        - comp["start_dips"] - comp["end_dips"]
    cols = []
    for name in cfg.channels:
        if name == "carbon_potential":
            cols.append(cp)
        elif name == "temperature":
            cols.append(880.0 + 60.0 * comp["plateau"] - 400.0 * comp["start_dips"]
                        - 150.0 * comp["end_dips"])
        else:
            cols.append(1050.0 + 250.0 * (cp - cfg.baseline))
    return np.column_stack(cols)


def generate(cfg: SynthConfig) -> tuple[TimeSeries, ChargeLog]:
    specs, horizon = draw_schedule(cfg)
    n = int(np.floor(horizon / cfg.dt)) + 1
    t = cfg.start_time + np.arange(n) * cfg.dt
    if cfg.jitter > 0:
        t = t + np.random.default_rng([cfg.seed, 1]).uniform(-cfg.jitter, cfg.jitter, n) * cfg.dt
    values = template(t, specs, cfg)
    if cfg.noise_std > 0:
        noise = np.random.default_rng([cfg.seed, 2]).standard_normal(values.shape)
        scale = np.array([_NOISE_SCALE[c] for c in cfg.channels]) * cfg.noise_std
        values = values + noise * scale
    log = ChargeLog([ChargeEntry(s.charge_id, s.start_ts, s.end_ts) for s in specs])
    return TimeSeries(t, list(cfg.channels), values), log
