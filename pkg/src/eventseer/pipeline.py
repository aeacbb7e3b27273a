"""End-to-end runs: ingest, window, label, train, tune extraction, evaluate, write."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

from .core import DataError, EventSet, TimeSeries, check_event_width, sampling_period, to_fixed_width_events
from .ensemble import StackedModel, load_stack, predict_stack, save_stack, train_stack
from .extraction import Grids, extract_events, optimize_extraction
from .io_pipeline import (
    RunArtifacts,
    RunConfig,
    load_dataset,
    load_events,
    write_events,
    write_op,
    write_outputs,
)
from .metrics import delta_t_histogram, match_events, score
from .regressor import FeatureMatrix, standardize_fit
from .windowing import OpSignal, WindowSet, WindowSpec, label_windows, slide

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Splits:
    train: slice
    val: slice
    test: slice


def chronological_splits(n: int, fractions) -> Splits:
    """Contiguous train/val/test index ranges in time order."""
    f_train, f_val, _ = fractions
    n_train = int(math.floor(n * f_train))
    n_val = int(math.floor(n * f_val))
    if n_train < 1 or n_val < 1 or n - n_train - n_val < 1:
        raise DataError(f"{n} windows are too few for a train/val/test split")
    return Splits(slice(0, n_train), slice(n_train, n_train + n_val), slice(n_train + n_val, n))


def _split_range(windows: WindowSet, part: slice) -> tuple[float, float]:
    mids = windows.mid_times[part]
    return float(mids[0]), float(mids[-1])


def _windows_for(series: TimeSeries, spec: WindowSpec) -> WindowSet:
    if len(series) < spec.width:
        raise DataError(f"no complete window: series has {len(series)} samples, width is {spec.width}")
    rep = check_event_width(sampling_period(series), spec.width_events)
    if rep.irregular:
        log.warning("irregular sampling: max gap deviation %.1f%% from median period %g s",
                    100 * rep.max_relative_deviation, rep.period)
    for note in rep.notes:
        log.warning(note)
    return slide(series, spec, rep.period)


@dataclass
class FitResult:
    artifacts: RunArtifacts
    windows: WindowSet
    splits: Splits
    manifest: dict


def run_fit(config: RunConfig) -> FitResult:
    config.validate()
    series = load_dataset(config.dataset_path)
    raw_events = load_events(config.events_path)
    spec = WindowSpec(config.width, config.step, config.width_events)
    windows = _windows_for(series, spec)
    truth = to_fixed_width_events(raw_events, spec.width_events)
    op_true = label_windows(windows, truth)
    sp = chronological_splits(len(windows), config.splits)
    log.info("%d windows (train %d, val %d, test %d), %d events",
             len(windows), sp.train.stop, sp.val.stop - sp.val.start,
             sp.test.stop - sp.test.start, len(truth))

    x, y = windows.features, op_true.values
    scaler = standardize_fit(x[sp.train])
    stack = train_stack(
        FeatureMatrix(x[sp.train], y[sp.train]),
        FeatureMatrix(x[sp.val], y[sp.val]),
        scaler,
        spec,
        base_configs=config.base_configs(),
        combiner=config.combiner,
        seed=config.seed,
    )
    stack.feature_names = series.feature_names
    stack.n_features = series.n_features
    op_pred = OpSignal(windows.mid_times, predict_stack(stack, x))

    tol = config.effective_tolerance
    lo, hi = _split_range(windows, sp.val)
    val_truth = truth.within(lo, hi)
    opt = optimize_extraction(op_pred.slice(sp.val.start, sp.val.stop), val_truth,
                              spec.width_events, config.grid_spec(), tol)
    stack.extraction = opt.params
    log.info("extraction %s, validation F1 %.4f", opt.params, opt.report.f1)

    events_pred = extract_events(op_pred, opt.params, spec.width_events)
    lo, hi = _split_range(windows, sp.test)
    match = match_events(events_pred.within(lo, hi), truth.within(lo, hi), tol)
    test_report = score(match)
    bin_width = config.histogram_bin or windows.period * spec.step
    hist = delta_t_histogram(match, bin_width)

    metrics = {
        **test_report.to_dict(),
        "split": "test",
        "extraction": opt.params.to_dict(),
        "validation": opt.report.to_dict(),
        "grid_points": opt.evaluated,
        "n_windows": {"train": sp.train.stop - sp.train.start,
                      "val": sp.val.stop - sp.val.start,
                      "test": sp.test.stop - sp.test.start},
        "histogram_bin_width": bin_width,
    }
    artifacts = RunArtifacts(
        config=config.to_dict(),
        reports=stack.reports,
        op_true=op_true,
        op_pred=op_pred,
        events_true=truth,
        events_pred=events_pred,
        metrics=metrics,
        histogram=hist,
        stack=stack,
    )
    manifest = write_outputs(config.output_dir, artifacts)
    return FitResult(artifacts, windows, sp, manifest)


def _load_for_model(stack: StackedModel, dataset_path) -> tuple[TimeSeries, WindowSet]:
    series = load_dataset(dataset_path)
    if series.n_features != stack.n_features:
        raise DataError(
            f"model was trained on {stack.n_features} features, dataset has {series.n_features}"
        )
    return series, _windows_for(series, stack.spec)


def run_detect(model_dir, dataset_path, output_dir) -> tuple[OpSignal, EventSet]:
    stack = load_stack(model_dir)
    if stack.extraction is None:
        raise DataError(f"{model_dir}: stack has no extraction parameters; run optimize first")
    _, windows = _load_for_model(stack, dataset_path)
    op_pred = OpSignal(windows.mid_times, predict_stack(stack, windows.features))
    events = extract_events(op_pred, stack.extraction, stack.spec.width_events)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_op(out / "op_pred.csv", op_pred)
    write_events(out / "events_pred.csv", events)
    return op_pred, events


def run_optimize(model_dir, dataset_path, events_path, grids: Grids = Grids(),
                 tolerance: float | None = None):
    """Re-tune extraction of a saved stack on a labelled dataset and persist the result."""
    stack = load_stack(model_dir)
    _, windows = _load_for_model(stack, dataset_path)
    truth = to_fixed_width_events(load_events(events_path), stack.spec.width_events)
    op_pred = OpSignal(windows.mid_times, predict_stack(stack, windows.features))
    tol = stack.spec.width_events if tolerance is None else tolerance
    opt = optimize_extraction(op_pred, truth, stack.spec.width_events, grids, tol)
    stack.extraction = opt.params
    save_stack(stack, model_dir)
    return opt

