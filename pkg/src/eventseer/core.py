"""Time, interval, series and event containers shared across the package.

All times are seconds stored as 64-bit floats. Wall-clock data is converted
to epoch seconds on ingestion; synthetic data uses ``index * period``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class EventSeerError(Exception):
    """Base class for package errors."""


class ConfigError(EventSeerError, ValueError):
    """Invalid parameters or configuration."""


class DataError(EventSeerError, ValueError):
    """Malformed or incompatible input data."""


class TrainingDiverged(EventSeerError, RuntimeError):
    """A training loss became non-finite."""


def _check_finite(value: float, what: str) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise DataError(f"{what} must be finite, got {value!r}")
    return value


@dataclass(frozen=True, order=True)
class Interval:
    """Closed time interval ``[start, end]`` in seconds."""

    start: float
    end: float

    def __post_init__(self) -> None:
        start = _check_finite(self.start, "interval start")
        end = _check_finite(self.end, "interval end")
        if start > end:
            raise DataError(f"interval start {start} is after end {end}")
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "end", end)

    @property
    def duration(self) -> float:
        return self.end - self.start

    @property
    def mid(self) -> float:
        return (self.start + self.end) / 2.0

    def shifted(self, dt: float) -> "Interval":
        return Interval(self.start + dt, self.end + dt)


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Timestamped multivariate observations, one row per timestamp."""

    timestamps: np.ndarray
    values: np.ndarray
    feature_names: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        ts = np.array(self.timestamps, dtype=np.float64).reshape(-1)
        vals = np.array(self.values, dtype=np.float64)
        if vals.ndim == 1:
            vals = vals.reshape(-1, 1)
        if vals.ndim != 2:
            raise DataError("values must be a 2-D matrix")
        if vals.shape[0] != ts.shape[0]:
            raise DataError(
                f"{ts.shape[0]} timestamps but {vals.shape[0]} value rows"
            )
        if vals.shape[1] < 1:
            raise DataError("a time series needs at least one feature column")
        if not np.all(np.isfinite(ts)):
            raise DataError("timestamps must be finite")
        if not np.all(np.isfinite(vals)):
            raise DataError("values must be finite")
        if ts.size > 1 and not np.all(np.diff(ts) > 0):
            bad = int(np.argmin(np.diff(ts) > 0)) + 1
            raise DataError(f"timestamps not strictly increasing at row {bad}")
        names = tuple(self.feature_names) or tuple(
            f"x{k}" for k in range(vals.shape[1])
        )
        if len(names) != vals.shape[1]:
            raise DataError(
                f"{len(names)} feature names for {vals.shape[1]} columns"
            )
        ts.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "feature_names", names)

    def __len__(self) -> int:
        return self.timestamps.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]


class EventSet(Sequence[Interval]):
    """Immutable list of intervals sorted by ``(start, end)``."""

    __slots__ = ("_events",)

    def __init__(self, events: Iterable[Interval | tuple[float, float]] = ()):
        items = [e if isinstance(e, Interval) else Interval(*e) for e in events]
        self._events: tuple[Interval, ...] = tuple(sorted(items))

    @classmethod
    def from_arrays(cls, starts, ends) -> "EventSet":
        return cls(Interval(s, e) for s, e in zip(starts, ends))

    def __getitem__(self, i):
        return self._events[i]

    def __len__(self) -> int:
        return len(self._events)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventSet):
            return NotImplemented
        return self._events == other._events

    def __repr__(self) -> str:
        return f"EventSet({list(self._events)!r})"

    @property
    def starts(self) -> np.ndarray:
        return np.array([e.start for e in self._events], dtype=np.float64)

    @property
    def ends(self) -> np.ndarray:
        return np.array([e.end for e in self._events], dtype=np.float64)

    @property
    def mids(self) -> np.ndarray:
        return np.array([e.mid for e in self._events], dtype=np.float64)

    def within(self, lo: float, hi: float) -> "EventSet":
        """Events whose mid-time lies in ``[lo, hi]``."""
        return EventSet(e for e in self._events if lo <= e.mid <= hi)


@dataclass(frozen=True)
class RegularityReport:
    period: float
    max_relative_deviation: float
    irregular: bool
    notes: tuple[str, ...] = ()


IRREGULARITY_TOLERANCE = 0.01


def sampling_period(series: TimeSeries | Sequence[float] | np.ndarray) -> RegularityReport:
    """Median spacing of the timestamps plus an irregularity flag.

    A series is flagged irregular when any gap deviates from the median by
    more than 1 % of the median.
    """
    ts = series.timestamps if isinstance(series, TimeSeries) else np.asarray(series, dtype=np.float64)
    if ts.shape[0] < 2:
        raise DataError("series too short")
    gaps = np.diff(ts)
    if not np.all(gaps > 0):
        raise DataError("timestamps must be strictly increasing")
    period = float(np.median(gaps))
    deviation = float(np.max(np.abs(gaps - period)) / period)
    return RegularityReport(
        period=period,
        max_relative_deviation=deviation,
        irregular=deviation > IRREGULARITY_TOLERANCE,
    )


def to_fixed_width_events(raw: EventSet, width_events: float) -> EventSet:
    """Replace each event by the interval of length ``width_events`` sharing its midpoint."""
    width_events = float(width_events)
    if not (width_events > 0 and math.isfinite(width_events)):
        raise ConfigError(f"width_events must be positive, got {width_events}")
    half = width_events / 2.0
    return EventSet(Interval(e.mid - half, e.mid + half) for e in raw)


def check_event_width(report: RegularityReport, width_events: float) -> RegularityReport:
    """Annotate a regularity report when events are narrower than one sample."""
    if width_events < report.period:
        note = (
            f"width_events {width_events:g} s is shorter than the sampling "
            f"period {report.period:g} s"
        )
        return RegularityReport(
            report.period, report.max_relative_deviation, report.irregular,
            report.notes + (note,),
        )
    return report
