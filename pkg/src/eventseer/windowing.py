"""Sliding windows over a series and their overlap labels.

A window of ``width`` samples starting at row ``k`` spans
``[t[k], t[k] + width * period)``: each sample owns one sampling period,
so even a single-sample window has positive duration.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .core import ConfigError, DataError, EventSet, Interval, TimeSeries, sampling_period


@dataclass(frozen=True)
class WindowSpec:
    width: int
    step: int
    width_events: float

    def __post_init__(self) -> None:
        for name in ("width", "step"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if not float(self.width_events) > 0:
            raise ConfigError(f"width_events must be positive, got {self.width_events!r}")
        object.__setattr__(self, "width_events", float(self.width_events))


@dataclass(frozen=True)
class Window:
    index: int
    first_sample: int
    span: Interval
    mid_time: float
    features: np.ndarray


@dataclass(frozen=True, eq=False)
class OpSignal:
    """Per-window overlap values aligned to window mid-times."""

    mid_times: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        mids = np.asarray(self.mid_times, dtype=np.float64).reshape(-1)
        vals = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if mids.shape != vals.shape:
            raise DataError("mid_times and values differ in length")
        object.__setattr__(self, "mid_times", mids)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.shape[0]

    def slice(self, lo: int, hi: int) -> "OpSignal":
        return OpSignal(self.mid_times[lo:hi], self.values[lo:hi])


class WindowSet:
    """Columnar storage for the windows of one series.

    Indexing yields :class:`Window` objects; the arrays ``offsets``,
    ``starts``, ``ends``, ``mid_times`` and ``features`` are the bulk view
    used by training and labeling. Feature rows are flattened sample-major,
    i.e. ``row = [s0f0, s0f1, ..., s1f0, ...]``.
    """

    def __init__(self, offsets, starts, ends, features, spec: WindowSpec, period: float):
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.starts = np.asarray(starts, dtype=np.float64)
        self.ends = np.asarray(ends, dtype=np.float64)
        self.mid_times = (self.starts + self.ends) / 2.0
        self.features = features
        self.spec = spec
        self.period = period

    def __len__(self) -> int:
        return self.offsets.shape[0]

    def __getitem__(self, i: int) -> Window:
        if not -len(self) <= i < len(self):
            raise IndexError(i)
        i %= len(self)
        return Window(
            index=i,
            first_sample=int(self.offsets[i]),
            span=Interval(self.starts[i], self.ends[i]),
            mid_time=float(self.mid_times[i]),
            features=self.features[i],
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def spans(self) -> list[Interval]:
        return [Interval(s, e) for s, e in zip(self.starts, self.ends)]


def window_count(n: int, width: int, step: int) -> int:
    if n < width:
        return 0
    return (n - width) // step + 1


def slide(series: TimeSeries, spec: WindowSpec, period: float | None = None) -> WindowSet:
    """Cut ``series`` into windows at offsets ``0, step, 2*step, ...``.

    Only complete windows are produced. ``period`` defaults to the median
    sampling period; a single-row series needs it passed explicitly.
    """
    n = len(series)
    count = window_count(n, spec.width, spec.step)
    if count == 0:
        raise DataError(
            f"no complete window: series has {n} samples, width is {spec.width}"
        )
    if period is None:
        if n < 2:
            raise DataError("series too short")
        period = sampling_period(series).period
    offsets = np.arange(count, dtype=np.int64) * spec.step
    starts = series.timestamps[offsets]
    ends = starts + spec.width * period
    # (n - width + 1, f, width) view, then pick offsets and go sample-major
    view = np.lib.stride_tricks.sliding_window_view(series.values, spec.width, axis=0)
    features = np.ascontiguousarray(
        view[offsets].transpose(0, 2, 1).reshape(count, spec.width * series.n_features)
    )
    return WindowSet(offsets, starts, ends, features, spec, float(period))


def interval_overlap(a: Interval, b: Interval) -> float:
    """Intersection-over-union of the durations of two intervals."""
    return _iou(a.start, a.end, b.start, b.end)


def _iou(s1: float, e1: float, s2: float, e2: float) -> float:
    inter = min(e1, e2) - max(s1, s2)
    if inter < 0.0:
        inter = 0.0
    union = (e1 - s1) + (e2 - s2) - inter
    if union <= 0.0:
        # both are points
        return 1.0 if (s1 == s2 and e1 == e2) else 0.0
    return inter / union


def label_windows(windows: WindowSet | list[Window], events: EventSet) -> OpSignal:
    """Overlap label per window: the maximum IoU against any event.

    Sweeps windows in start order while keeping a heap of events that have
    begun, keyed by their end time; events ending before the current
    window starts are discarded for good.
    """
    if isinstance(windows, WindowSet):
        starts, ends, mids = windows.starts, windows.ends, windows.mid_times
    else:
        starts = np.array([w.span.start for w in windows], dtype=np.float64)
        ends = np.array([w.span.end for w in windows], dtype=np.float64)
        mids = np.array([w.mid_time for w in windows], dtype=np.float64)
    out = np.zeros(starts.shape[0], dtype=np.float64)
    if len(events) == 0 or starts.shape[0] == 0:
        return OpSignal(mids, out)

    ev = sorted((e.start, e.end) for e in events)
    order = np.argsort(starts, kind="stable")
    active: list[tuple[float, float]] = []  # (end, start)
    j = 0
    for i in order:
        ws, we = float(starts[i]), float(ends[i])
        while j < len(ev) and ev[j][0] <= we:
            heapq.heappush(active, (ev[j][1], ev[j][0]))
            j += 1
        while active and active[0][0] < ws:
            heapq.heappop(active)
        best = 0.0
        for e_end, e_start in active:
            v = _iou(ws, we, e_start, e_end)
            if v > best:
                best = v
        out[i] = best
    return OpSignal(mids, out)
