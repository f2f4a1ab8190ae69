"""
Prediction curves and event extraction.

The model is slid over a segment with stride 1 by default; each output is
stamped with its window-centre time. Events are strict local extrema that
clear the threshold, thinned by per-kind non-maximum suppression.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .ingestion import UniformSeries
from .model import ModelParams, predict_batch

EventKind = Literal["start", "end"]


@dataclass
class PredictionSeries:
    timestamps: np.ndarray
    values: np.ndarray
    segment_id: int = 0

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.timestamps.shape != self.values.shape:
            raise ValueError("timestamps and values differ in length")
        if len(self.timestamps) > 1 and np.any(np.diff(self.timestamps) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("prediction values must be finite")

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class PhaseEvent:
    kind: EventKind
    timestamp: float
    score: float


def predict_series(m: ModelParams, s: UniformSeries, w: int | None = None, stride: int = 1,
                   chunk: int = 4096) -> PredictionSeries:
    w = m.config.window_len if w is None else w
    if w != m.config.window_len:
        raise ValueError(f"window length {w} does not match model ({m.config.window_len})")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    n = len(s)
    if n < w:
        raise ValueError(f"series has {n} samples, needs at least {w}")
    view = np.lib.stride_tricks.sliding_window_view(s.values, w, axis=0).transpose(0, 2, 1)
    starts = np.arange(0, n - w + 1, stride)
    preds = np.concatenate([predict_batch(m, view[starts[i:i + chunk]])
                            for i in range(0, len(starts), chunk)])
    centers = starts + w // 2
    return PredictionSeries(s.t0 + centers * s.dt, preds, s.segment_id)


def _extrema(values: np.ndarray, sign: float) -> list[int]:
    """Earliest index of each strict local maximum of ``sign * values``."""
    v = sign * values
    out = []
    n = len(v)
    i = 1
    while i < n - 1:
        if v[i] > v[i - 1]:
            j = i
            while j + 1 < n and v[j + 1] == v[i]:
                j += 1
            if j + 1 < n and v[j + 1] < v[i]:
                out.append(i)
            i = j + 1
        else:
            i += 1
    return out


def _suppress(cands: list[PhaseEvent], min_separation: float) -> list[PhaseEvent]:
    kept: list[PhaseEvent] = []
    kept_ts: list[float] = []
    for ev in sorted(cands, key=lambda e: (-e.score, e.timestamp)):
        if all(abs(ev.timestamp - t) >= min_separation for t in kept_ts):
            kept.append(ev)
            kept_ts.append(ev.timestamp)
    return kept


def extract_events(p: PredictionSeries, threshold: float = 0.5,
                   min_separation: float = 1200.0) -> list[PhaseEvent]:
    """
    Starts are strict local maxima ``>= threshold``, ends strict local minima
    ``<= -threshold``. A flat apex reports its first sample; the first and
    last samples never qualify. Within each kind, an event is dropped when a
    stronger (or equally strong and earlier) kept event lies closer than
    ``min_separation`` seconds.
    """
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    if min_separation < 0:
        raise ValueError("min_separation must be >= 0")
    events: list[PhaseEvent] = []
    for kind, sign in (("start", 1.0), ("end", -1.0)):
        cands = [PhaseEvent(kind, float(p.timestamps[i]), float(abs(p.values[i])))
                 for i in _extrema(p.values, sign) if sign * p.values[i] >= threshold]
        events.extend(_suppress(cands, min_separation))
    events.sort(key=lambda e: (e.timestamp, e.kind))
    return events


def extract_all(preds: Sequence[PredictionSeries], threshold: float = 0.5,
                min_separation: float = 1200.0) -> list[PhaseEvent]:
    """Per-segment extraction merged into one time-ordered list."""
    events = [e for p in preds for e in extract_events(p, threshold, min_separation)]
    return sorted(events, key=lambda e: (e.timestamp, e.kind))


def format_events_csv(events: Sequence[PhaseEvent]) -> str:
    lines = ["kind,timestamp,score"]
    lines += [f"{e.kind},{e.timestamp!r},{e.score!r}" for e in events]
    return "\n".join(lines) + "\n"


def parse_events_csv(data: bytes | str) -> list[PhaseEvent]:
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != ["kind", "timestamp", "score"]:
        raise ValueError(f"expected header kind,timestamp,score, got {reader.fieldnames}")
    out = []
    for row in reader:
        if row["kind"] not in ("start", "end"):
            raise ValueError(f"unknown event kind {row['kind']!r}")
        out.append(PhaseEvent(row["kind"], float(row["timestamp"]), float(row["score"])))
    return out


def format_predictions_csv(preds: Sequence[PredictionSeries]) -> str:
    lines = ["ts,pred"]
    for p in preds:
        lines += [f"{t!r},{v!r}" for t, v in zip(p.timestamps.tolist(), p.values.tolist())]
    return "\n".join(lines) + "\n"
