"""
Triangular regression labels around charge start/end timestamps.

A start at ``t_ex`` gives every sample within half a window duration the
candidate label ``1 - |t_ex - t|/(t_sw/2)``; ends give the negated value.
Each sample keeps the candidate of largest magnitude, the earlier event
winning ties, and 0 when no event is in reach.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .ingestion import ChargeLog, UniformSeries

Kind = Literal["start", "between", "end"]


class LabelConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LabelConfig:
    t_sw: float = 1200.0
    class_epsilon: float = 0.05

    def __post_init__(self):
        if not self.t_sw > 0:
            raise LabelConfigError(f"t_sw must be positive, got {self.t_sw}")
        if not 0 < self.class_epsilon < 1:
            raise LabelConfigError(f"class_epsilon must lie in (0, 1), got {self.class_epsilon}")


@dataclass
class LabelSeries:
    t0: float
    dt: float
    labels: np.ndarray
    segment_id: int = 0

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def timestamps(self) -> np.ndarray:
        return self.t0 + np.arange(len(self)) * self.dt

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["ts", "label"])
        for t, v in zip(self.timestamps, self.labels):
            w.writerow([repr(float(t)), repr(float(v))])
        return buf.getvalue()


def generate_labels(s: UniformSeries, log: ChargeLog, cfg: LabelConfig) -> LabelSeries:
    if cfg.t_sw < 2 * s.dt:
        raise LabelConfigError(
            f"t_sw={cfg.t_sw} s is narrower than two grid steps (dt={s.dt} s)")
    half = cfg.t_sw / 2
    times = s.timestamps
    labels = np.zeros(len(s))
    for kind, t_ex in log.events():
        lo = int(np.searchsorted(times, t_ex - half, side="left"))
        hi = int(np.searchsorted(times, t_ex + half, side="right"))
        if hi <= lo:
            continue
        cand = 1.0 - np.abs(t_ex - times[lo:hi]) / half
        # searchsorted bounds can include a rounding-edge sample just outside reach
        cand = np.maximum(cand, 0.0)
        if kind == "end":
            cand = -cand
        cur = labels[lo:hi]
        # events are visited chronologically, so strict > keeps the earlier on ties
        replace = np.abs(cand) > np.abs(cur)
        cur[replace] = cand[replace]
    return LabelSeries(s.t0, s.dt, labels, s.segment_id)


def classify_label(l: float, eps: float = 0.05) -> Kind:
    if abs(l) > 1:
        raise ValueError(f"label {l} outside [-1, 1]")
    if l >= 1 - eps:
        return "start"
    if l <= -1 + eps:
        return "end"
    return "between"


def window_target(labels: LabelSeries, center_index: int) -> float:
    if not 0 <= center_index < len(labels):
        raise IndexError(f"center index {center_index} outside [0, {len(labels)})")
    return float(labels.labels[center_index])
