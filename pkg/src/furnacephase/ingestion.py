"""
Sensor and charge CSV ingestion, resampling and normalization.

Sensor CSV: UTF-8, header row, first column the timestamp, remaining
columns one channel each. Charge CSV: header ``charge_id,start_ts,end_ts``.
Timestamps are epoch seconds (integer or real) or ISO-8601 strings; naive
ISO timestamps are read as UTC.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)

CHARGE_HEADER = ("charge_id", "start_ts", "end_ts")


class CSVParseError(ValueError):
    """Base class for unreadable CSV input."""


class EmptyFileError(CSVParseError):
    pass


class MissingHeaderError(CSVParseError):
    pass


class NoValidRowsError(CSVParseError):
    pass


class ChargeValidationError(ValueError):
    """A charge log entry violates an ordering invariant."""

    def __init__(self, message: str, charge_id: str):
        super().__init__(message)
        self.charge_id = charge_id


class ChannelError(ValueError):
    pass


@dataclass
class TimeSeries:
    """Raw, irregularly sampled multichannel readings."""

    timestamps: np.ndarray
    channel_names: list[str]
    values: np.ndarray
    dropped_rows: int = 0

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        if not self.channel_names:
            raise ChannelError("time series needs at least one channel")
        if self.values.shape != (len(self.timestamps), len(self.channel_names)):
            raise ValueError(
                f"values shape {self.values.shape} does not match "
                f"{len(self.timestamps)} timestamps x {len(self.channel_names)} channels"
            )
        if len(self.timestamps) > 1 and np.any(np.diff(self.timestamps) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if not (np.all(np.isfinite(self.timestamps)) and np.all(np.isfinite(self.values))):
            raise ValueError("time series contains non-finite values")

    def __len__(self) -> int:
        return len(self.timestamps)

    def select_channels(self, names: Sequence[str]) -> "TimeSeries":
        idx = _channel_indices(self.channel_names, names)
        return TimeSeries(self.timestamps.copy(), list(names), self.values[:, idx].copy(),
                          self.dropped_rows)


@dataclass
class UniformSeries:
    """Readings on the grid ``t0 + i*dt``; one contiguous segment."""

    t0: float
    dt: float
    values: np.ndarray
    channel_names: list[str]
    segment_id: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.values.shape[1] != len(self.channel_names):
            raise ChannelError("channel count does not match values")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("uniform series contains non-finite values")

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def timestamps(self) -> np.ndarray:
        return self.t0 + np.arange(len(self)) * self.dt

    @property
    def t_end(self) -> float:
        return self.t0 + (len(self) - 1) * self.dt

    def slice_time(self, t_start: float, t_stop: float) -> "UniformSeries | None":
        """Samples with ``t_start <= t < t_stop``, or None when nothing is left."""
        ts = self.timestamps
        lo = int(np.searchsorted(ts, t_start, side="left"))
        hi = int(np.searchsorted(ts, t_stop, side="left"))
        if hi <= lo:
            return None
        return UniformSeries(self.t0 + lo * self.dt, self.dt, self.values[lo:hi].copy(),
                             list(self.channel_names), self.segment_id)


@dataclass(frozen=True)
class ChargeEntry:
    charge_id: str
    start_ts: float
    end_ts: float

    @property
    def duration(self) -> float:
        return self.end_ts - self.start_ts


@dataclass
class ChargeLog:
    """Ground-truth production phases, sorted and non-overlapping."""

    entries: list[ChargeEntry] = field(default_factory=list)

    def __post_init__(self):
        self.entries = list(self.entries)
        validate_charges(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def events(self) -> list[tuple[str, float]]:
        """All ``(kind, timestamp)`` pairs in chronological (log) order."""
        out = []
        for e in self.entries:
            out.append(("start", e.start_ts))
            out.append(("end", e.end_ts))
        return out

    def within(self, t_start: float, t_stop: float) -> "ChargeLog":
        """Charges whose whole interval lies in ``[t_start, t_stop)``."""
        return ChargeLog([e for e in self.entries if e.start_ts >= t_start and e.end_ts < t_stop])


@dataclass
class NormStats:
    channel_names: list[str]
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        for name, s in zip(self.channel_names, self.std):
            if not s > 0:
                raise ChannelError(f"channel {name!r} has zero spread")

    def to_dict(self) -> dict:
        return {"channel_names": list(self.channel_names),
                "mean": [float(x) for x in self.mean],
                "std": [float(x) for x in self.std]}

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(list(d["channel_names"]), np.array(d["mean"]), np.array(d["std"]))


def _channel_indices(available: Sequence[str], wanted: Sequence[str]) -> list[int]:
    missing = [n for n in wanted if n not in available]
    if missing:
        raise ChannelError(f"unknown channel(s) {missing}; available: {list(available)}")
    return [list(available).index(n) for n in wanted]


def parse_timestamp(text: str) -> float:
    """Epoch seconds from a numeric or ISO-8601 cell."""
    text = text.strip()
    try:
        value = float(text)
    except ValueError:
        if text.endswith("Z"):
            text = text[:-1] + "+00:00"
        dt = datetime.fromisoformat(text)
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return dt.timestamp()
    if not math.isfinite(value):
        raise ValueError(f"non-finite timestamp {text!r}")
    return value


def _looks_like_timestamp(text: str) -> bool:
    try:
        parse_timestamp(text)
    except ValueError:
        return False
    return True


def _read_rows(data: bytes | str) -> list[list[str]]:
    text = data.decode("utf-8-sig") if isinstance(data, bytes) else data
    if not text.strip():
        raise EmptyFileError("file is empty")
    return [row for row in csv.reader(io.StringIO(text)) if row and any(c.strip() for c in row)]


def parse_sensor_csv(data: bytes | str) -> TimeSeries:
    """
    Parse a sensor CSV export.

    Rows with the wrong number of cells, an unreadable timestamp or a
    non-finite reading are dropped; the count is kept in
    ``TimeSeries.dropped_rows``. Rows are sorted by time and, for
    duplicate timestamps, the row appearing last in the file wins.
    """
    rows = _read_rows(data)
    header = [c.strip() for c in rows[0]]
    if len(header) < 2:
        raise MissingHeaderError("header needs a timestamp column and at least one channel")
    if _looks_like_timestamp(header[0]):
        raise MissingHeaderError(f"first row {rows[0]!r} looks like data, not a header")

    n_cols = len(header)
    by_time: dict[float, list[float]] = {}
    dropped = 0
    for row in rows[1:]:
        if len(row) != n_cols:
            dropped += 1
            continue
        try:
            ts = parse_timestamp(row[0])
            vals = [float(c) for c in row[1:]]
        except ValueError:
            dropped += 1
            continue
        if not all(math.isfinite(v) for v in vals):
            dropped += 1
            continue
        # duplicate timestamp: last row wins
        by_time[ts] = vals

    if not by_time:
        raise NoValidRowsError("no valid data rows")
    if dropped:
        logger.warning("dropped %d malformed sensor row(s)", dropped)
    times = np.array(sorted(by_time))
    values = np.array([by_time[t] for t in times], dtype=np.float64)
    return TimeSeries(times, header[1:], values, dropped_rows=dropped)


def validate_charges(entries: Sequence[ChargeEntry]) -> None:
    prev = None
    for e in entries:
        if not e.start_ts < e.end_ts:
            raise ChargeValidationError(f"start after end for {e.charge_id}", e.charge_id)
        if prev is not None:
            if e.start_ts < prev.start_ts:
                raise ChargeValidationError(
                    f"charges not sorted by start time at {e.charge_id}", e.charge_id)
            if e.start_ts < prev.end_ts:
                raise ChargeValidationError(
                    f"charge {e.charge_id} overlaps {prev.charge_id}", e.charge_id)
        prev = e


def parse_charge_csv(data: bytes | str) -> ChargeLog:
    rows = _read_rows(data)
    header = tuple(c.strip() for c in rows[0])
    if header != CHARGE_HEADER:
        raise MissingHeaderError(f"expected header {','.join(CHARGE_HEADER)}, got {','.join(header)}")
    entries = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise CSVParseError(f"line {lineno}: expected 3 cells, got {len(row)}")
        cid = row[0].strip()
        try:
            start, end = parse_timestamp(row[1]), parse_timestamp(row[2])
        except ValueError as exc:
            raise CSVParseError(f"line {lineno} ({cid}): {exc}") from None
        if not start < end:
            raise ChargeValidationError(f"start after end for {cid}", cid)
        entries.append(ChargeEntry(cid, start, end))
    if not entries:
        raise NoValidRowsError("charge file has no entries")
    entries.sort(key=lambda e: e.start_ts)
    return ChargeLog(entries)


def _fmt(x: float) -> str:
    return repr(float(x))


def format_sensor_csv(ts: TimeSeries) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["ts", *ts.channel_names])
    for t, row in zip(ts.timestamps, ts.values):
        w.writerow([_fmt(t), *(_fmt(v) for v in row)])
    return buf.getvalue()


def format_charge_csv(log: ChargeLog) -> str:
    lines = [",".join(CHARGE_HEADER)]
    lines += [f"{e.charge_id},{_fmt(e.start_ts)},{_fmt(e.end_ts)}" for e in log]
    return "\n".join(lines) + "\n"


def resample(ts: TimeSeries, dt: float, gap_threshold: float | None = None) -> list[UniformSeries]:
    """
    Linearly interpolate onto a uniform grid, one segment per gap-free stretch.

    A raw inter-sample gap larger than ``gap_threshold`` (default ``5*dt``)
    ends a segment. Each segment's grid starts at its first raw sample and
    stops at or before its last one. Segments with fewer than two raw
    samples are skipped and logged.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if gap_threshold is None:
        gap_threshold = 5 * dt
    if gap_threshold < dt:
        raise ValueError("gap_threshold must be >= dt")

    t = ts.timestamps
    breaks = np.flatnonzero(np.diff(t) > gap_threshold) + 1
    bounds = zip(np.r_[0, breaks], np.r_[breaks, len(t)])

    out: list[UniformSeries] = []
    skipped = 0
    for lo, hi in bounds:
        if hi - lo < 2:
            skipped += 1
            continue
        seg_t = t[lo:hi]
        t0 = seg_t[0]
        n = int(math.floor((seg_t[-1] - t0) / dt + 1e-9)) + 1
        grid = t0 + np.arange(n) * dt
        vals = np.column_stack([np.interp(grid, seg_t, ts.values[lo:hi, c])
                                for c in range(ts.values.shape[1])])
        out.append(UniformSeries(float(t0), float(dt), vals, list(ts.channel_names),
                                 segment_id=len(out)))
    if skipped:
        logger.warning("skipped %d segment(s) with fewer than 2 samples", skipped)
    return out


def fit_normalization(train: Sequence[UniformSeries]) -> NormStats:
    """Per-channel mean and population std pooled over all training samples."""
    if not train:
        raise ValueError("need at least one training series")
    names = list(train[0].channel_names)
    for s in train[1:]:
        if list(s.channel_names) != names:
            raise ChannelError("training series disagree on channels")
    pooled = np.concatenate([s.values for s in train], axis=0)
    mean = pooled.mean(axis=0)
    std = pooled.std(axis=0)
    for name, s in zip(names, std):
        if not s > 0:
            raise ChannelError(f"channel {name!r} is constant in the training data")
    return NormStats(names, mean, std)


def apply_normalization(s: UniformSeries, stats: NormStats) -> UniformSeries:
    if list(s.channel_names) != list(stats.channel_names):
        raise ChannelError(
            f"series channels {s.channel_names} do not match statistics {stats.channel_names}")
    return UniformSeries(s.t0, s.dt, (s.values - stats.mean) / stats.std,
                         list(s.channel_names), s.segment_id)


def invert_normalization(s: UniformSeries, stats: NormStats) -> UniformSeries:
    return UniformSeries(s.t0, s.dt, s.values * stats.std + stats.mean,
                         list(s.channel_names), s.segment_id)


def split_by_charge(log: ChargeLog, ratio: float = 0.8) -> tuple[ChargeLog, ChargeLog]:
    """Chronological split: the first ``ceil(ratio*n)`` charges train."""
    if not 0 < ratio < 1:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
    n = len(log)
    if n < 2:
        raise ValueError("need at least 2 charges to split")
    # guard against 0.7*10 == 7.000000000000001
    n_train = math.ceil(ratio * n - 1e-9)
    if n_train >= n:
        raise ValueError("empty test set")
    return ChargeLog(log.entries[:n_train]), ChargeLog(log.entries[n_train:])


def split_boundary(train: ChargeLog, test: ChargeLog) -> float:
    """Timestamp halfway between the last training and first test charge."""
    return 0.5 * (train.entries[-1].end_ts + test.entries[0].start_ts)
