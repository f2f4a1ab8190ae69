"""
Command-line front end.

    furnacephase generate | label | train | predict | evaluate | pipeline | export-plot

Settings come from defaults, then ``--config FILE`` (TOML or JSON), then
flags; ``--set section.key=value`` reaches any setting without a dedicated
flag. Exit codes: 0 success, 1 runtime failure, 2 usage or configuration
error (including missing input files).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, pipeline
from .config import ConfigError, PipelineConfig, apply_overrides, load_config
from .evaluation import EvalReport
from .ingestion import (ChargeLog, TimeSeries, format_charge_csv, format_sensor_csv,
                        parse_charge_csv, parse_sensor_csv, resample)
from .model import ModelFileError, format_history_csv, load_model, save_model
from .peaks import format_events_csv, format_predictions_csv, parse_events_csv
from .synthgen import generate

logger = logging.getLogger("furnacephase")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
COMMANDS = ("generate", "label", "train", "predict", "evaluate", "pipeline", "export-plot")

# flag dest -> dotted config key
_FLAG_KEYS = {
    "seed": "seed", "output_dir": "paths.output_dir", "sensor_csv": "paths.sensor_csv",
    "charge_csv": "paths.charge_csv", "model_file": "paths.model_file", "dt": "dt",
    "t_sw": "t_sw", "window_len": "window_len", "stride": "stride", "threshold": "threshold",
    "min_separation": "min_separation", "tolerance": "tolerance", "epochs": "train.epochs",
    "n_charges": "synth.n_charges", "region": "eval_region",
}


class UsageError(Exception):
    pass


class MissingInputError(Exception):
    def __init__(self, path):
        super().__init__(f"input file not found: {path}")
        self.path = str(path)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("common options")
    g.add_argument("--config", help="TOML or JSON config file")
    g.add_argument("--seed", type=int)
    g.add_argument("--output-dir")
    g.add_argument("--sensor-csv")
    g.add_argument("--charge-csv")
    g.add_argument("--model-file")
    g.add_argument("--dt", type=float, help="resampling interval, seconds")
    g.add_argument("--t-sw", type=float, help="label window duration, seconds")
    g.add_argument("--window-len", type=int, help="model window length, samples (odd)")
    g.add_argument("--stride", type=int)
    g.add_argument("--threshold", type=float)
    g.add_argument("--min-separation", type=float)
    g.add_argument("--tolerance", type=float)
    g.add_argument("--epochs", type=int)
    g.add_argument("--n-charges", type=int)
    g.add_argument("--region", choices=("test", "all"), help="region scored/predicted")
    g.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any setting, e.g. --set train.lr=0.002")
    g.add_argument("--json", action="store_true", help="machine-readable output and errors")
    g.add_argument("--no-timestamps", action="store_true",
                   help="omit the generated_at field from reports")
    g.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="furnacephase", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.add_parser("generate", parents=[common], help="write a synthetic sensor/charge pair")
    sub.add_parser("label", parents=[common], help="write triangular labels as ts,label")
    sub.add_parser("train", parents=[common], help="train and save the model")
    sub.add_parser("predict", parents=[common], help="write prediction curve and events")
    p_eval = sub.add_parser("evaluate", parents=[common], help="score events against charges")
    p_eval.add_argument("--events", help="events CSV (default OUTPUT_DIR/events.csv)")
    p_pipe = sub.add_parser("pipeline", parents=[common],
                            help="generate, train, predict, evaluate and export-plot")
    p_pipe.add_argument("--no-generate", action="store_true",
                        help="use existing sensor/charge files instead of synthesising them")
    sub.add_parser("export-plot", parents=[common],
                   help="aligned CSV of signal, labels, predictions, events plus a PNG")
    return parser


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = load_config(args.config)
    overrides = {}
    for dest, key in _FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides[key] = value
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value
    return apply_overrides(cfg, overrides).validate()


def _read(path) -> bytes:
    p = Path(path)
    if not p.is_file():
        raise MissingInputError(p)
    return p.read_bytes()


def _write(path, data: str | bytes) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    p.write_bytes(data)
    return p


def _write_json(path, doc: dict, args) -> Path:
    if not args.no_timestamps:
        doc = {**doc, "generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds")}
    return _write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


class Context:
    def __init__(self, cfg: PipelineConfig, args: argparse.Namespace):
        self.cfg = cfg
        self.args = args
        self.paths = cfg.paths.resolved()
        self.out = Path(self.paths.output_dir)
        self.artifacts: dict[str, str] = {}

    def record(self, name: str, path: Path) -> None:
        self.artifacts[name] = str(path)

    def sensor(self) -> TimeSeries:
        return parse_sensor_csv(_read(self.paths.sensor_csv))

    def charges(self) -> ChargeLog:
        return parse_charge_csv(_read(self.paths.charge_csv))


def cmd_generate(ctx: Context) -> dict:
    ts, log = generate(ctx.cfg.synth_config())
    ctx.record("sensor_csv", _write(ctx.paths.sensor_csv, format_sensor_csv(ts)))
    ctx.record("charge_csv", _write(ctx.paths.charge_csv, format_charge_csv(log)))
    return {"samples": len(ts), "charges": len(log)}


def cmd_label(ctx: Context) -> dict:
    ts = ctx.sensor().select_channels(ctx.cfg.channels)
    segments = resample(ts, ctx.cfg.dt, ctx.cfg.gap_threshold)
    labels = pipeline.label_segments(segments, ctx.charges(), ctx.cfg)
    body = "".join(lab.to_csv().split("\n", 1)[1] for lab in labels)
    ctx.record("labels_csv", _write(ctx.out / "labels.csv", "ts,label\n" + body))
    return {"segments": len(segments), "samples": int(sum(len(l) for l in labels))}


def cmd_train(ctx: Context) -> dict:
    from .plotting import plot_history

    prep = pipeline.prepare(ctx.sensor(), ctx.charges(), ctx.cfg)
    model, history, ws = pipeline.fit(prep, ctx.cfg)
    ctx.record("model_file", _write(ctx.paths.model_file, save_model(model)))
    ctx.record("history_csv", _write(ctx.out / "history.csv", format_history_csv(history)))
    ctx.record("history_png", plot_history(ctx.out / "history.png", history))
    return {"windows": len(ws), "train_charges": len(prep.train_log),
            "test_charges": len(prep.test_log), "final_loss": history[-1]}


def _load_model(ctx: Context):
    try:
        return load_model(_read(ctx.paths.model_file))
    except ModelFileError as exc:
        raise ConfigError(f"{ctx.paths.model_file}: {exc}") from None


def _region_segments(ctx: Context):
    ts = ctx.sensor()
    if ctx.cfg.eval_region == "all":
        log = ctx.charges() if Path(ctx.paths.charge_csv).is_file() else None
        return resample(ts.select_channels(ctx.cfg.channels), ctx.cfg.dt,
                        ctx.cfg.gap_threshold), log
    log = ctx.charges()
    prep = pipeline.prepare(ts, log, ctx.cfg)
    return prep.test_segments, prep.test_log


def cmd_predict(ctx: Context) -> dict:
    model = _load_model(ctx)
    segments, _ = _region_segments(ctx)
    preds, events = pipeline.detect(model, segments, ctx.cfg)
    ctx.record("predictions_csv", _write(ctx.out / "predictions.csv",
                                         format_predictions_csv(preds)))
    ctx.record("events_csv", _write(ctx.out / "events.csv", format_events_csv(events)))
    return {"predictions": int(sum(len(p) for p in preds)), "events": len(events)}


def cmd_evaluate(ctx: Context) -> dict:
    events_path = getattr(ctx.args, "events", None) or ctx.out / "events.csv"
    events = parse_events_csv(_read(events_path))
    report = pipeline.score(events, ctx.charges(), ctx.cfg)
    ctx.record("report_json", _write_json(ctx.out / "report.json",
                                          {"report": report.to_dict()}, ctx.args))
    ctx.report = report
    return {"report": report.to_dict()}


def cmd_export_plot(ctx: Context) -> dict:
    from .plotting import plot_detection

    model = _load_model(ctx)
    segments, log = _region_segments(ctx)
    preds, events = pipeline.detect(model, segments, ctx.cfg)
    labels = pipeline.label_segments(segments, log, ctx.cfg) if log is not None else None
    pred_at = {float(t): float(v) for p in preds for t, v in zip(p.timestamps, p.values)}
    rows_ts = np.concatenate([s.timestamps for s in segments])
    raw = np.concatenate([s.values for s in segments], axis=0)
    lab = np.concatenate([l.labels for l in labels]) if labels else np.full(len(rows_ts), np.nan)
    event_at: dict[int, str] = {}
    for e in events:
        event_at[int(np.argmin(np.abs(rows_ts - e.timestamp)))] = e.kind

    names = list(ctx.cfg.channels)
    lines = [",".join(["ts", *names, "label", "pred", "event"])]
    for i, t in enumerate(rows_ts):
        pred = pred_at.get(float(t))
        cells = [repr(float(t)), *(repr(float(v)) for v in raw[i]),
                 "" if np.isnan(lab[i]) else repr(float(lab[i])),
                 "" if pred is None else repr(pred), event_at.get(i, "")]
        lines.append(",".join(cells))
    ctx.record("plot_csv", _write(ctx.out / "plot.csv", "\n".join(lines) + "\n"))
    pred_ts = np.concatenate([p.timestamps for p in preds]) if preds else np.zeros(0)
    pred_v = np.concatenate([p.values for p in preds]) if preds else np.zeros(0)
    ctx.record("plot_png", plot_detection(
        ctx.out / "plot.png", rows_ts, raw[:, 0], names[0], rows_ts, lab, pred_ts, pred_v,
        events, log, ctx.cfg.threshold))
    return {"rows": len(rows_ts), "events": len(events)}


def cmd_pipeline(ctx: Context) -> dict:
    summary = {}
    if not getattr(ctx.args, "no_generate", False):
        summary["generate"] = cmd_generate(ctx)
    summary["train"] = cmd_train(ctx)
    summary["predict"] = cmd_predict(ctx)
    summary["evaluate"] = cmd_evaluate(ctx)
    summary["export-plot"] = cmd_export_plot(ctx)
    return summary


HANDLERS = {"generate": cmd_generate, "label": cmd_label, "train": cmd_train,
            "predict": cmd_predict, "evaluate": cmd_evaluate, "pipeline": cmd_pipeline,
            "export-plot": cmd_export_plot}


def _fail(code: int, kind: str, message: str, as_json: bool, **extra) -> int:
    if as_json:
        doc = {"error": {"type": kind, "message": message, "exit_code": code, **extra}}
        print(json.dumps(doc, sort_keys=True), file=sys.stderr)
    else:
        print(f"furnacephase: error: {message}", file=sys.stderr)
    return code


def run_subcommand(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    as_json = "--json" in argv
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError(f"a command is required: one of {', '.join(COMMANDS)}")
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", str(exc), as_json)

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        ctx = Context(cfg, args)
        summary = HANDLERS[args.command](ctx)
    except MissingInputError as exc:
        return _fail(EXIT_USAGE, "missing-input", str(exc), args.json, path=exc.path)
    except ConfigError as exc:
        return _fail(EXIT_USAGE, "config", str(exc), args.json)
    except Exception as exc:  # noqa: BLE001 - top-level boundary
        logger.debug("failure", exc_info=True)
        return _fail(EXIT_RUNTIME, type(exc).__name__, str(exc), args.json)

    if args.json:
        print(json.dumps({"command": args.command, "summary": summary,
                          "artifacts": ctx.artifacts}, indent=2, sort_keys=True, default=str))
    else:
        report: EvalReport | None = getattr(ctx, "report", None)
        if report is not None:
            print(report.format_table())
        for name, path in ctx.artifacts.items():
            print(f"wrote {name}: {path}")
    return EXIT_OK


def main() -> None:
    sys.exit(run_subcommand())


if __name__ == "__main__":
    main()
