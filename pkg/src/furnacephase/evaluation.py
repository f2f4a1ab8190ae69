"""Scoring extracted events against the charge log."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

from .ingestion import ChargeLog
from .peaks import PhaseEvent

KINDS = ("start", "end")


@dataclass(frozen=True)
class Match:
    kind: str
    predicted_ts: float
    truth_ts: float

    @property
    def distance(self) -> float:
        return abs(self.predicted_ts - self.truth_ts)


@dataclass
class Matching:
    matches: list[Match]
    unmatched_predicted: list[PhaseEvent]
    unmatched_truth: list[tuple[str, float]]


@dataclass
class KindStats:
    truth_count: int
    predicted_count: int
    matched: int
    mean_distance: float | None
    max_distance: float | None
    false_positives: int
    false_negatives: int


@dataclass
class EvalReport:
    tolerance: float
    start: KindStats
    end: KindStats
    total: KindStats

    def to_dict(self) -> dict:
        return {"tolerance": self.tolerance, "start": asdict(self.start),
                "end": asdict(self.end), "total": asdict(self.total)}

    def format_table(self) -> str:
        head = f"{'kind':<6} {'truth':>6} {'pred':>6} {'match':>6} {'fp':>4} {'fn':>4} " \
               f"{'mean|d| s':>10} {'max|d| s':>10}"
        rows = [head, "-" * len(head)]
        for name, st in (("start", self.start), ("end", self.end), ("total", self.total)):
            mean = "-" if st.mean_distance is None else f"{st.mean_distance:.2f}"
            mx = "-" if st.max_distance is None else f"{st.max_distance:.2f}"
            rows.append(f"{name:<6} {st.truth_count:>6} {st.predicted_count:>6} {st.matched:>6} "
                        f"{st.false_positives:>4} {st.false_negatives:>4} {mean:>10} {mx:>10}")
        rows.append(f"tolerance: {self.tolerance:g} s")
        return "\n".join(rows)


def match_events(predicted: Sequence[PhaseEvent], truth: ChargeLog,
                 tolerance: float) -> Matching:
    """
    Greedy nearest-first one-to-one matching, separately per kind.

    All (prediction, truth) pairs within ``tolerance`` are visited by
    increasing distance, then earlier truth time, then earlier prediction
    time; a pair is accepted when neither side is taken yet.
    """
    if not tolerance > 0:
        raise ValueError(f"tolerance must be positive, got {tolerance}")
    truth_events = truth.events()
    matches: list[Match] = []
    used_pred: set[int] = set()
    used_truth: set[int] = set()
    for kind in KINDS:
        p_idx = [i for i, e in enumerate(predicted) if e.kind == kind]
        t_idx = [j for j, (k, _) in enumerate(truth_events) if k == kind]
        pairs = []
        for i in p_idx:
            for j in t_idx:
                d = abs(predicted[i].timestamp - truth_events[j][1])
                if d <= tolerance:
                    pairs.append((d, truth_events[j][1], predicted[i].timestamp, i, j))
        pairs.sort(key=lambda q: q[:3])
        for d, t_ts, p_ts, i, j in pairs:
            if i in used_pred or j in used_truth:
                continue
            used_pred.add(i)
            used_truth.add(j)
            matches.append(Match(kind, p_ts, t_ts))
    matches.sort(key=lambda m: (m.truth_ts, m.kind))
    return Matching(
        matches,
        sorted((e for i, e in enumerate(predicted) if i not in used_pred),
               key=lambda e: (e.timestamp, e.kind)),
        [ev for j, ev in enumerate(truth_events) if j not in used_truth],
    )


def _stats(matches: list[Match], n_truth: int, n_pred: int) -> KindStats:
    dists = [m.distance for m in matches]
    return KindStats(
        truth_count=n_truth,
        predicted_count=n_pred,
        matched=len(matches),
        mean_distance=sum(dists) / len(dists) if dists else None,
        max_distance=max(dists) if dists else None,
        false_positives=n_pred - len(matches),
        false_negatives=n_truth - len(matches),
    )


def evaluate(predicted: Sequence[PhaseEvent], truth: ChargeLog, tolerance: float) -> EvalReport:
    matching = match_events(predicted, truth, tolerance)
    per_kind = {}
    for kind in KINDS:
        per_kind[kind] = _stats([m for m in matching.matches if m.kind == kind],
                                sum(1 for k, _ in truth.events() if k == kind),
                                sum(1 for e in predicted if e.kind == kind))
    total = _stats(matching.matches, 2 * len(truth), len(predicted))
    return EvalReport(tolerance, per_kind["start"], per_kind["end"], total)
