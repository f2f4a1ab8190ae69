"""Fixed-length sliding windows with centre-sample regression targets."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ingestion import UniformSeries
from .labeling import LabelSeries

logger = logging.getLogger(__name__)


@dataclass
class WindowSet:
    """
    A batch of windows stored column-wise.

    ``inputs`` has shape ``(n, window_len, channels)``; the other arrays are
    per-window. ``center_indices`` index into the source segment.
    """

    window_len: int
    stride: int
    channels: int
    segment_ids: np.ndarray
    center_indices: np.ndarray
    center_timestamps: np.ndarray
    inputs: np.ndarray
    targets: np.ndarray

    def __len__(self) -> int:
        return len(self.targets)

    def subset(self, mask_or_index) -> "WindowSet":
        return WindowSet(self.window_len, self.stride, self.channels,
                         self.segment_ids[mask_or_index], self.center_indices[mask_or_index],
                         self.center_timestamps[mask_or_index], self.inputs[mask_or_index],
                         self.targets[mask_or_index])

    @classmethod
    def empty(cls, window_len: int, stride: int, channels: int) -> "WindowSet":
        return cls(window_len, stride, channels, np.zeros(0, dtype=np.int64),
                   np.zeros(0, dtype=np.int64), np.zeros(0),
                   np.zeros((0, window_len, channels)), np.zeros(0))


def _check_shape(w: int, stride: int) -> None:
    if w < 3 or w % 2 == 0:
        raise ValueError(f"window length must be odd and >= 3, got {w}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")


def make_windows(s: UniformSeries, labels: LabelSeries, w: int, stride: int = 1) -> WindowSet:
    _check_shape(w, stride)
    if len(labels) != len(s) or labels.t0 != s.t0 or labels.dt != s.dt:
        raise ValueError("labels are not aligned with the series")
    c = s.values.shape[1]
    n = len(s)
    if n < w:
        logger.warning("segment %d has %d samples, shorter than window %d; no windows",
                       s.segment_id, n, w)
        return WindowSet.empty(w, stride, c)
    starts = np.arange(0, n - w + 1, stride)
    centers = starts + w // 2
    view = np.lib.stride_tricks.sliding_window_view(s.values, w, axis=0)  # (n-w+1, c, w)
    inputs = np.ascontiguousarray(view[starts].transpose(0, 2, 1))
    return WindowSet(
        window_len=w, stride=stride, channels=c,
        segment_ids=np.full(len(starts), s.segment_id, dtype=np.int64),
        center_indices=centers.astype(np.int64),
        center_timestamps=s.t0 + centers * s.dt,
        inputs=inputs,
        targets=labels.labels[centers].copy(),
    )


def concat_windows(sets: Sequence[WindowSet]) -> WindowSet:
    if not sets:
        raise ValueError("nothing to concatenate")
    first = sets[0]
    for ws in sets[1:]:
        if (ws.window_len, ws.channels) != (first.window_len, first.channels):
            raise ValueError("window sets disagree on window length or channels")
    return WindowSet(
        first.window_len, first.stride, first.channels,
        np.concatenate([ws.segment_ids for ws in sets]),
        np.concatenate([ws.center_indices for ws in sets]),
        np.concatenate([ws.center_timestamps for ws in sets]),
        np.concatenate([ws.inputs for ws in sets], axis=0),
        np.concatenate([ws.targets for ws in sets]),
    )


def rebalance(ws: WindowSet, near_threshold: float = 0.05, keep_far_ratio: float = 0.1,
              seed: int = 0) -> WindowSet:
    """
    Thin out the zero-dominated windows.

    Windows with ``|target| >= near_threshold`` are all kept; every other
    window survives with probability ``keep_far_ratio``. Order is preserved.
    """
    if not 0 <= near_threshold <= 1:
        raise ValueError(f"near_threshold must lie in [0, 1], got {near_threshold}")
    if not 0 < keep_far_ratio <= 1:
        raise ValueError(f"keep_far_ratio must lie in (0, 1], got {keep_far_ratio}")
    draws = np.random.default_rng(seed).random(len(ws))
    keep = (np.abs(ws.targets) >= near_threshold) | (draws < keep_far_ratio)
    return ws.subset(keep)
