"""CSV ingestion, run configuration and the output-directory layout.

Every number written to CSV uses 17 significant digits, which round-trips
64-bit floats exactly.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .core import ConfigError, DataError, EventSet, Interval, TimeSeries
from .ensemble import COMBINERS, DEFAULT_STACK, BaseConfig, StackedModel, save_stack
from .extraction import Grids
from .metrics import Histogram
from .regressor import TrainReport
from .windowing import OpSignal

log = logging.getLogger(__name__)

OUTPUT_FORMAT_VERSION = 1
INCOMPLETE_MARKER = ".incomplete"
LOG_ENV = "EVENTSEER_LOG"
_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING,
               "info": logging.INFO, "debug": logging.DEBUG}


def configure_logging(default: str = "warn") -> None:
    name = os.environ.get(LOG_ENV, default).lower()
    level = _LOG_LEVELS.get(name, logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", force=True)


def fmt(x: float) -> str:
    return format(float(x), ".17g")


# --------------------------------------------------------------------------
# reading


def _parse_iso(text: str) -> float:
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    dt = datetime.fromisoformat(s)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def _time_parser(sample: str) -> Callable[[str], float]:
    """Pick numeric or ISO-8601 parsing for a whole file from its first time cell."""
    try:
        float(sample)
        return float
    except ValueError:
        pass
    try:
        _parse_iso(sample)
    except ValueError:
        raise DataError(f"time value {sample!r} is neither numeric nor ISO-8601") from None
    return _parse_iso


def _is_missing(cell: str) -> bool:
    c = cell.strip()
    return c == "" or c.lower() in ("nan", "na", "null")


def _read_rows(path) -> list[list[str]]:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"{p}: file not found")
    with open(p, newline="", encoding="utf-8") as fh:
        return [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]


def load_dataset(path) -> TimeSeries:
    """Read a ``time,<feature>...`` CSV into a :class:`TimeSeries`.

    Rows with missing or NaN cells are dropped (and counted in a warning);
    any other unparseable cell is an error.
    """
    rows = _read_rows(path)
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if not header or header[0].lower() != "time":
        raise DataError(f"{path}: first column must be named 'time'")
    names = tuple(header[1:])
    if not names:
        raise DataError(f"{path}: no feature columns")
    body = rows[1:]
    parse_t = None
    times, values = [], []
    dropped = 0
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
        if any(_is_missing(c) for c in row):
            dropped += 1
            continue
        if parse_t is None:
            parse_t = _time_parser(row[0].strip())
        try:
            t = parse_t(row[0].strip())
            vals = [float(c) for c in row[1:]]
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: unparseable cell ({exc})") from None
        if not all(math.isfinite(v) for v in vals) or not math.isfinite(t):
            dropped += 1
            continue
        times.append(t)
        values.append(vals)
    if dropped:
        log.warning("%s: dropped %d row%s with missing values", path, dropped, "" if dropped == 1 else "s")
    ts = np.array(times, dtype=np.float64)
    if ts.size > 1:
        d = np.diff(ts)
        if np.any(d == 0):
            raise DataError(f"{path}: duplicate timestamp {ts[1:][d == 0][0]!r}")
        if np.any(d < 0):
            raise DataError(f"{path}: rows are not sorted by time")
    vals = np.array(values, dtype=np.float64).reshape(len(values), len(names))
    return TimeSeries(ts, vals, names)


def load_events(path) -> EventSet:
    """Read events from a CSV with one column (mid-times) or two (start, end).

    A first row that does not parse as times is taken as a header.
    """
    rows = _read_rows(path)
    if not rows:
        return EventSet()
    width = len(rows[0])
    if width not in (1, 2):
        raise DataError(f"{path}: events need 1 or 2 columns, got {width}")
    try:
        _time_parser(rows[0][0].strip())
        body = rows
    except DataError:
        body = rows[1:]
    parse_t = None
    events = []
    for k, row in enumerate(body, start=1):
        if len(row) != width:
            raise DataError(f"{path}: row {k} has {len(row)} columns, expected {width}")
        if parse_t is None:
            parse_t = _time_parser(row[0].strip())
        try:
            cells = [parse_t(c.strip()) for c in row]
        except ValueError:
            raise DataError(f"{path}: row {k} is not parseable") from None
        start, end = (cells[0], cells[0]) if width == 1 else cells
        if start > end:
            raise DataError(f"{path}: row {k} has start {start} after end {end}")
        events.append(Interval(start, end))
    return EventSet(events)


# --------------------------------------------------------------------------
# writing


def write_dataset(path, series: TimeSeries) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(("time",) + series.feature_names) + "\n")
        for t, row in zip(series.timestamps, series.values):
            fh.write(fmt(t) + "," + ",".join(fmt(v) for v in row) + "\n")


def write_events(path, events: EventSet) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("start,end\n")
        for e in events:
            fh.write(f"{fmt(e.start)},{fmt(e.end)}\n")


def write_op(path, signal: OpSignal) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("mid_time,value\n")
        for t, v in zip(signal.mid_times, signal.values):
            fh.write(f"{fmt(t)},{fmt(v)}\n")


def write_losses(path, reports: list[TrainReport]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "model_name", "train_mse", "val_mse"])
        for rep in reports:
            for epoch, (tr, va) in enumerate(zip(rep.train_loss, rep.val_loss)):
                w.writerow([epoch, rep.model_name, fmt(tr), fmt(va)])


def write_histogram(path, hist: Histogram) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("bin_lower_edge,count\n")
        for edge, count in zip(hist.lower_edges, hist.counts):
            fh.write(f"{fmt(edge)},{int(count)}\n")


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# --------------------------------------------------------------------------
# run configuration


@dataclass
class RunConfig:
    """Resolved parameters of one ``fit`` run.

    JSON keys equal the field names; ``base_models`` entries look like
    ``{"kind": "ffn", "hidden_layers": [20, 20]}`` or
    ``{"kind": "ridge", "lambda": 1.0}``, and ``grids`` holds the lists
    ``kernel_sizes``, ``sigmas`` and ``thresholds``.
    """

    dataset_path: str = ""
    events_path: str = ""
    width: int = 2
    step: int = 1
    width_events: float = 1.0
    splits: tuple[float, float, float] = (0.70, 0.15, 0.15)
    base_models: list[dict] = field(default_factory=lambda: [b.to_dict() for b in DEFAULT_STACK])
    combiner: str = "average"
    grids: dict[str, list] = field(default_factory=lambda: Grids().to_dict())
    tolerance: float | None = None
    histogram_bin: float | None = None
    seed: int = 0
    output_dir: str = "eventseer-out"

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg = cls(**d)
        cfg.splits = tuple(cfg.splits)
        return cfg

    def to_dict(self) -> dict[str, Any]:
        return {name: (list(v) if isinstance(v, tuple) else v)
                for name, v in ((n, getattr(self, n)) for n in self.__dataclass_fields__)}

    @property
    def effective_tolerance(self) -> float:
        return float(self.width_events if self.tolerance is None else self.tolerance)

    def base_configs(self) -> list[BaseConfig]:
        try:
            return [BaseConfig.from_dict(b) for b in self.base_models]
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad base model entry: {exc}") from None

    def grid_spec(self) -> Grids:
        try:
            return Grids(**self.grids)
        except TypeError as exc:
            raise ConfigError(f"bad grids: {exc}") from None

    def validate(self) -> None:
        """Parameter checks raise :class:`ConfigError`; missing inputs raise :class:`DataError`."""
        for name in ("width", "step"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ConfigError(f"--{name} must be a positive integer, got {v!r}")
        if not (isinstance(self.width_events, (int, float)) and self.width_events > 0):
            raise ConfigError(f"--width-events must be positive, got {self.width_events!r}")
        if len(self.splits) != 3 or any(s <= 0 for s in self.splits):
            raise ConfigError("splits must be three positive fractions")
        if abs(sum(self.splits) - 1.0) > 1e-9:
            raise ConfigError(f"splits must sum to 1, got {sum(self.splits)}")
        if self.combiner not in COMBINERS:
            raise ConfigError(f"combiner must be one of {COMBINERS}, got {self.combiner!r}")
        if self.tolerance is not None and not self.tolerance > 0:
            raise ConfigError("--tolerance must be positive")
        if self.histogram_bin is not None and not self.histogram_bin > 0:
            raise ConfigError("histogram_bin must be positive")
        if not self.base_models:
            raise ConfigError("at least one base model is required")
        self.base_configs()
        self.grid_spec()
        if not self.dataset_path:
            raise ConfigError("--dataset is required")
        if not self.events_path:
            raise ConfigError("--events is required")
        for p in (self.dataset_path, self.events_path):
            if not Path(p).is_file():
                raise DataError(f"{p}: file not found")


def load_config(path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return RunConfig.from_dict(data)


# --------------------------------------------------------------------------
# output directory


@dataclass
class RunArtifacts:
    config: dict
    reports: list[TrainReport]
    op_true: OpSignal
    op_pred: OpSignal
    events_true: EventSet
    events_pred: EventSet
    metrics: dict
    histogram: Histogram
    stack: StackedModel


ARTIFACT_FILES = (
    ("config_echo.json", "json"),
    ("losses.csv", "csv"),
    ("op_true.csv", "csv"),
    ("op_pred.csv", "csv"),
    ("events_true.csv", "csv"),
    ("events_pred.csv", "csv"),
    ("metrics.json", "json"),
    ("deltat_hist.csv", "csv"),
    ("models/", "stack"),
)


def write_outputs(output_dir, artifacts: RunArtifacts) -> dict:
    """Write every artifact, then ``manifest.json``.

    A ``.incomplete`` marker exists for the whole duration of the write and
    is only removed after the manifest is in place.
    """
    out = Path(output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        marker = out / INCOMPLETE_MARKER
        marker.write_text("write in progress\n")
    except OSError as exc:
        raise DataError(f"cannot write to {out}: {exc}") from None
    manifest_path = out / "manifest.json"
    if manifest_path.exists():
        manifest_path.unlink()

    write_json(out / "config_echo.json", artifacts.config)
    write_losses(out / "losses.csv", artifacts.reports)
    write_op(out / "op_true.csv", artifacts.op_true)
    write_op(out / "op_pred.csv", artifacts.op_pred)
    write_events(out / "events_true.csv", artifacts.events_true)
    write_events(out / "events_pred.csv", artifacts.events_pred)
    write_json(out / "metrics.json", artifacts.metrics)
    write_histogram(out / "deltat_hist.csv", artifacts.histogram)
    model_files = save_stack(artifacts.stack, out / "models")

    manifest = {
        "format_version": OUTPUT_FORMAT_VERSION,
        "files": [
            {"name": name, "format": kind, "version": OUTPUT_FORMAT_VERSION,
             **({"contents": model_files} if kind == "stack" else {})}
            for name, kind in ARTIFACT_FILES
        ],
    }
    write_json(manifest_path, manifest)
    marker.unlink()
    return manifest
