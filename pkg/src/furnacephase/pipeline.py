"""End-to-end orchestration shared by the CLI and the acceptance suite."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .config import PipelineConfig, derive_seed
from .evaluation import EvalReport, evaluate
from .ingestion import (ChargeLog, NormStats, TimeSeries, UniformSeries, apply_normalization,
                        fit_normalization, resample, split_boundary, split_by_charge)
from .labeling import LabelConfig, LabelSeries, generate_labels
from .model import ModelParams, build_model, train
from .peaks import PhaseEvent, PredictionSeries, extract_all, predict_series
from .windowing import WindowSet, concat_windows, make_windows, rebalance

logger = logging.getLogger(__name__)


@dataclass
class Prepared:
    """Resampled data split chronologically by charge."""

    segments: list[UniformSeries]
    train_log: ChargeLog
    test_log: ChargeLog
    boundary: float
    train_segments: list[UniformSeries]
    test_segments: list[UniformSeries]

    def region(self, name: str) -> tuple[list[UniformSeries], ChargeLog]:
        if name == "test":
            return self.test_segments, self.test_log
        if name == "train":
            return self.train_segments, self.train_log
        return self.segments, ChargeLog(self.train_log.entries + self.test_log.entries)


def _cut(segments: list[UniformSeries], t_start: float, t_stop: float) -> list[UniformSeries]:
    out = []
    for s in segments:
        part = s.slice_time(t_start, t_stop)
        if part is not None and len(part) >= 2:
            out.append(part)
    return out


def prepare(ts: TimeSeries, log: ChargeLog, cfg: PipelineConfig) -> Prepared:
    ts = ts.select_channels(cfg.channels)
    segments = resample(ts, cfg.dt, cfg.gap_threshold)
    if not segments:
        raise ValueError("resampling produced no segments")
    train_log, test_log = split_by_charge(log, cfg.train_ratio)
    boundary = split_boundary(train_log, test_log)
    return Prepared(segments, train_log, test_log, boundary,
                    _cut(segments, -np.inf, boundary), _cut(segments, boundary, np.inf))


def label_segments(segments: list[UniformSeries], log: ChargeLog,
                   cfg: PipelineConfig) -> list[LabelSeries]:
    lc = LabelConfig(cfg.t_sw, cfg.class_epsilon)
    return [generate_labels(s, log, lc) for s in segments]


def training_windows(prep: Prepared, stats: NormStats, cfg: PipelineConfig) -> WindowSet:
    labels = label_segments(prep.train_segments, prep.train_log, cfg)
    sets = [make_windows(apply_normalization(s, stats), lab, cfg.window_len, cfg.stride)
            for s, lab in zip(prep.train_segments, labels)]
    ws = concat_windows(sets)
    return rebalance(ws, cfg.near_threshold, cfg.keep_far_ratio,
                     derive_seed(cfg.seed, "rebalance"))


def fit(prep: Prepared, cfg: PipelineConfig) -> tuple[ModelParams, list[float], WindowSet]:
    stats = fit_normalization(prep.train_segments)
    ws = training_windows(prep, stats, cfg)
    logger.info("training on %d windows", len(ws))
    model, history = train(build_model(cfg.model_config()), ws, cfg.train_config())
    model.normalization = stats
    return model, history, ws


def predict_segments(model: ModelParams, segments: list[UniformSeries],
                     cfg: PipelineConfig) -> list[PredictionSeries]:
    if model.normalization is None:
        raise ValueError("model file carries no normalization statistics")
    out = []
    for s in segments:
        if len(s) < model.config.window_len:
            logger.warning("segment %d too short for prediction; skipped", s.segment_id)
            continue
        out.append(predict_series(model, apply_normalization(s, model.normalization)))
    return out


def detect(model: ModelParams, segments: list[UniformSeries], cfg: PipelineConfig):
    preds = predict_segments(model, segments, cfg)
    events = extract_all(preds, cfg.threshold, cfg.effective_min_separation)
    return preds, events


def region_events(events: list[PhaseEvent], log: ChargeLog, cfg: PipelineConfig):
    """Events and ground truth restricted to ``cfg.eval_region``."""
    if cfg.eval_region == "all":
        return list(events), log
    train_log, test_log = split_by_charge(log, cfg.train_ratio)
    boundary = split_boundary(train_log, test_log)
    return [e for e in events if e.timestamp >= boundary], test_log


def score(events: list[PhaseEvent], log: ChargeLog, cfg: PipelineConfig) -> EvalReport:
    events, truth = region_events(events, log, cfg)
    return evaluate(events, truth, cfg.effective_tolerance)


@dataclass
class RunResult:
    model: ModelParams
    history: list[float]
    predictions: list[PredictionSeries]
    events: list[PhaseEvent]
    report: EvalReport
    prepared: Prepared
    n_windows: int


def run(ts: TimeSeries, log: ChargeLog, cfg: PipelineConfig) -> RunResult:
    prep = prepare(ts, log, cfg)
    model, history, ws = fit(prep, cfg)
    segments, _ = prep.region(cfg.eval_region)
    preds, events = detect(model, segments, cfg)
    return RunResult(model, history, preds, events, score(events, log, cfg), prep, len(ws))
