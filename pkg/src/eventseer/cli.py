"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 training
divergence. Standard output carries machine-readable results only; logs go
to standard error (verbosity from ``EVENTSEER_LOG``).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .core import ConfigError, DataError, EventSeerError, TrainingDiverged, to_fixed_width_events
from .extraction import Grids
from .io_pipeline import (
    RunConfig,
    configure_logging,
    load_config,
    load_events,
    write_dataset,
    write_events,
    write_histogram,
    write_json,
)
from .metrics import delta_t_histogram, match_events, score
from .synthbench import SynthConfig, generate

log = logging.getLogger("eventseer")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _positive_int(flag):
    def conv(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} must be an integer, got {text!r}")
        if v < 1:
            raise argparse.ArgumentTypeError(f"{flag} must be >= 1, got {v}")
        return v
    return conv


def _positive_float(flag):
    def conv(text):
        try:
            v = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} must be a number, got {text!r}")
        if not v > 0:
            raise argparse.ArgumentTypeError(f"{flag} must be > 0, got {v}")
        return v
    return conv


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="eventseer", description="Event detection by overlap regression.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", help="train a stack, tune extraction, evaluate on the test split")
    f.add_argument("--config", help="JSON run configuration; flags override its values")
    f.add_argument("--dataset", help="CSV with a 'time' column followed by feature columns")
    f.add_argument("--events", help="CSV of reference events (mid, or start,end)")
    f.add_argument("--width", type=_positive_int("--width"), help="window width in samples (default 2)")
    f.add_argument("--step", type=_positive_int("--step"), help="samples between window starts (default 1)")
    f.add_argument("--width-events", type=_positive_float("--width-events"),
                   help="duration in seconds events are normalized to (default 1)")
    f.add_argument("--combiner", choices=("average", "ffn"), help="stack combiner (default average)")
    f.add_argument("--tolerance", type=_positive_float("--tolerance"),
                   help="match tolerance in seconds between event mid-times (default width-events)")
    f.add_argument("--output-dir", help="directory for all run artifacts")
    f.add_argument("--seed", type=int, help="random seed (default 0)")

    d = sub.add_parser("detect", help="apply a saved stack to a dataset")
    d.add_argument("--model", required=True, help="models/ directory written by fit")
    d.add_argument("--dataset", required=True, help="CSV dataset with the training feature layout")
    d.add_argument("--output-dir", required=True, help="where op_pred.csv and events_pred.csv go")

    e = sub.add_parser("evaluate", help="score predicted events against reference events")
    e.add_argument("--pred", required=True, help="CSV of predicted events")
    e.add_argument("--truth", required=True, help="CSV of reference events")
    e.add_argument("--width-events", type=_positive_float("--width-events"), default=None,
                   help="normalize both event sets to this duration; also the default tolerance")
    e.add_argument("--tolerance", type=_positive_float("--tolerance"), default=None,
                   help="match tolerance in seconds (default width-events)")
    e.add_argument("--histogram-bin", type=_positive_float("--histogram-bin"), default=1.0,
                   help="bin width in seconds for deltat_hist.csv (default 1)")
    e.add_argument("--output-dir", help="also write metrics.json and deltat_hist.csv here")

    o = sub.add_parser("optimize", help="re-tune extraction parameters of a saved stack")
    o.add_argument("--model", required=True, help="models/ directory written by fit")
    o.add_argument("--dataset", required=True, help="CSV dataset")
    o.add_argument("--events", required=True, help="CSV of reference events")
    o.add_argument("--grids", help="JSON file with kernel_sizes, sigmas, thresholds lists")
    o.add_argument("--tolerance", type=_positive_float("--tolerance"), default=None,
                   help="match tolerance in seconds (default width-events of the stack)")

    s = sub.add_parser("synth", help="write a seeded synthetic dataset and its events")
    s.add_argument("--out", required=True, help="output directory for dataset.csv and events.csv")
    s.add_argument("--n", type=int, default=20000, help="number of samples (default 20000)")
    s.add_argument("--features", type=int, default=4, help="number of features (default 4)")
    s.add_argument("--events", type=int, default=40, help="number of events (default 40)")
    s.add_argument("--event-width", type=float, default=8.0, help="event duration in seconds (default 8)")
    s.add_argument("--amplitude", type=float, default=3.0, help="bump height in noise std units (default 3)")
    s.add_argument("--noise-std", type=float, default=1.0, help="noise standard deviation (default 1)")
    s.add_argument("--gap", type=float, default=50.0, help="minimum gap between events in seconds (default 50)")
    s.add_argument("--period", type=float, default=1.0, help="sampling period in seconds (default 1)")
    s.add_argument("--seed", type=int, default=42, help="random seed (default 42)")
    return p


_FIT_FLAGS = {
    "dataset": "dataset_path", "events": "events_path", "width": "width", "step": "step",
    "width_events": "width_events", "combiner": "combiner", "tolerance": "tolerance",
    "output_dir": "output_dir", "seed": "seed",
}


def resolve_fit_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {field: getattr(args, flag) for flag, field in _FIT_FLAGS.items()
                 if getattr(args, flag) is not None}
    return replace(cfg, **overrides)


def cmd_fit(args) -> int:
    from .pipeline import run_fit

    cfg = resolve_fit_config(args)
    res = run_fit(cfg)
    m = res.artifacts.metrics
    log.info("test F1 %.4f (precision %.4f, recall %.4f) -> %s",
             m["f1"], m["precision"], m["recall"], cfg.output_dir)
    return EXIT_OK


def cmd_detect(args) -> int:
    from .pipeline import run_detect

    _, events = run_detect(args.model, args.dataset, args.output_dir)
    log.info("%d events written to %s", len(events), args.output_dir)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    pred = load_events(args.pred)
    truth = load_events(args.truth)
    if args.width_events is not None:
        pred = to_fixed_width_events(pred, args.width_events)
        truth = to_fixed_width_events(truth, args.width_events)
    tol = args.tolerance if args.tolerance is not None else args.width_events
    if tol is None:
        raise ConfigError("--tolerance or --width-events is required")
    match = match_events(pred, truth, tol)
    report = score(match).to_dict()
    print(json.dumps(report, sort_keys=True))
    if args.output_dir:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "metrics.json", report)
        write_histogram(out / "deltat_hist.csv", delta_t_histogram(match, args.histogram_bin))
    return EXIT_OK


def cmd_optimize(args) -> int:
    from .pipeline import run_optimize

    grids = Grids()
    if args.grids:
        try:
            grids = Grids(**json.loads(Path(args.grids).read_text()))
        except (OSError, ValueError, TypeError) as exc:
            if isinstance(exc, EventSeerError):
                raise
            raise ConfigError(f"cannot read grids {args.grids}: {exc}") from None
    opt = run_optimize(args.model, args.dataset, args.events, grids, args.tolerance)
    print(json.dumps({"extraction": opt.params.to_dict(), **opt.report.to_dict()}, sort_keys=True))
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = SynthConfig(
        n_samples=args.n, n_features=args.features, n_events=args.events,
        event_width=args.event_width, bump_amplitude=args.amplitude,
        noise_std=args.noise_std, min_event_gap=args.gap, seed=args.seed,
        period=args.period,
    )
    series, events = generate(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_dataset(out / "dataset.csv", series)
    write_events(out / "events.csv", events)
    log.info("wrote %d samples and %d events to %s", len(series), len(events), out)
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "detect": cmd_detect, "evaluate": cmd_evaluate,
            "optimize": cmd_optimize, "synth": cmd_synth}


def main(argv=None) -> int:
    configure_logging()
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # --help and usage errors
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"eventseer {args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDiverged as exc:
        print(f"eventseer {args.command}: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except DataError as exc:
        print(f"eventseer {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
