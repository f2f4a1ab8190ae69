"""Figures written next to the CSV exports (Agg backend, PNG)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .ingestion import ChargeLog  # noqa: E402
from .peaks import PhaseEvent  # noqa: E402

STYLE = {
    "figure.dpi": 100,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    "legend.fontsize": 8,
}
# no "Software"/date metadata so identical inputs give identical bytes
_PNG_META = {"Software": None}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata=_PNG_META)
    plt.close(fig)
    return path


def _hours(t: np.ndarray, origin: float) -> np.ndarray:
    return (np.asarray(t) - origin) / 3600.0


def plot_detection(path, signal_ts, signal, channel: str, label_ts, labels, pred_ts, preds,
                   events: Sequence[PhaseEvent], truth: ChargeLog | None = None,
                   threshold: float = 0.5) -> Path:
    """Raw channel on top; real labels, predicted labels and accepted events below."""
    origin = float(signal_ts[0]) if len(signal_ts) else 0.0
    with plt.rc_context(STYLE):
        fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(11, 5.5), sharex=True,
                                       gridspec_kw={"height_ratios": [1, 1.3]})
        ax0.plot(_hours(signal_ts, origin), signal, lw=0.7, color="0.25")
        ax0.set_ylabel(channel)
        if truth is not None:
            for e in truth:
                ax0.axvline(_hours(e.start_ts, origin), color="tab:green", lw=0.6, alpha=0.6)
                ax0.axvline(_hours(e.end_ts, origin), color="tab:red", lw=0.6, alpha=0.6)

        ax1.plot(_hours(label_ts, origin), labels, lw=1.0, color="tab:blue", label="real label")
        ax1.plot(_hours(pred_ts, origin), preds, lw=1.0, color="tab:orange",
                 label="predicted label")
        for y in (threshold, -threshold):
            ax1.axhline(y, color="0.5", lw=0.6, ls="--")
        starts = [e for e in events if e.kind == "start"]
        ends = [e for e in events if e.kind == "end"]
        if starts:
            ax1.plot(_hours([e.timestamp for e in starts], origin), [e.score for e in starts],
                     "^", color="tab:green", ms=5, label="start")
        if ends:
            ax1.plot(_hours([e.timestamp for e in ends], origin), [-e.score for e in ends],
                     "v", color="tab:red", ms=5, label="end")
        ax1.set_ylim(-1.1, 1.1)
        ax1.set_ylabel("label")
        ax1.set_xlabel("hours")
        ax1.legend(loc="upper right", ncol=4)
        fig.tight_layout()
        return _save(fig, path)


def plot_history(path, history: Sequence[float]) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.semilogy(np.arange(1, len(history) + 1), history, marker=".", lw=1)
        ax.set_xlabel("epoch")
        ax.set_ylabel("mean MSE")
        fig.tight_layout()
        return _save(fig, path)
