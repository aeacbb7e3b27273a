"""From a predicted overlap signal to events.

Smooth with a truncated Gaussian, keep thresholded local maxima, and put an
event of ``width_events`` seconds around each peak's window mid-time. The
smoothing scale and threshold are picked by exhaustive grid search for the
best F1 against reference events.

``sigma`` is measured in window steps (one step = ``step * period``
seconds on the time axis).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigError, DataError, EventSet, Interval
from .metrics import ScoreReport, evaluate
from .windowing import OpSignal

DEFAULT_KERNEL_SIZES = (1, 3, 5, 7, 9)
DEFAULT_SIGMAS = (0.5, 1.0, 2.0, 3.0, 4.0, 5.0)
DEFAULT_THRESHOLDS = tuple(round(0.05 * k, 2) for k in range(1, 20))


@dataclass(frozen=True)
class ExtractionParams:
    kernel_size: int
    sigma: float
    peak_threshold: float

    def __post_init__(self) -> None:
        if int(self.kernel_size) != self.kernel_size or self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ConfigError(f"kernel_size must be odd and >= 1, got {self.kernel_size}")
        if not self.sigma > 0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}")
        if not 0 < self.peak_threshold < 1:
            raise ConfigError(f"peak_threshold must be in (0, 1), got {self.peak_threshold}")
        object.__setattr__(self, "kernel_size", int(self.kernel_size))
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "peak_threshold", float(self.peak_threshold))

    def to_dict(self) -> dict:
        return {"kernel_size": self.kernel_size, "sigma": self.sigma,
                "peak_threshold": self.peak_threshold}


@dataclass(frozen=True)
class Grids:
    kernel_sizes: tuple[int, ...] = DEFAULT_KERNEL_SIZES
    sigmas: tuple[float, ...] = DEFAULT_SIGMAS
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS

    def __post_init__(self) -> None:
        if not (self.kernel_sizes and self.sigmas and self.thresholds):
            raise ConfigError("extraction grids must be non-empty")
        object.__setattr__(self, "kernel_sizes", tuple(int(k) for k in self.kernel_sizes))
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))
        for k in self.kernel_sizes:
            ExtractionParams(k, 1.0, 0.5)
        for s in self.sigmas:
            ExtractionParams(1, s, 0.5)
        for t in self.thresholds:
            ExtractionParams(1, 1.0, t)

    def to_dict(self) -> dict:
        return {"kernel_sizes": list(self.kernel_sizes), "sigmas": list(self.sigmas),
                "thresholds": list(self.thresholds)}


def gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    if int(size) != size or size < 1 or size % 2 == 0:
        raise ConfigError(f"kernel size must be an odd positive integer, got {size}")
    if not sigma > 0:
        raise ConfigError(f"sigma must be positive, got {sigma}")
    half = (int(size) - 1) // 2
    k = np.arange(-half, half + 1, dtype=np.float64)
    w = np.exp(-(k * k) / (2.0 * sigma * sigma))
    return w / w.sum()


def smooth(signal: OpSignal | np.ndarray, kernel: np.ndarray):
    """Same-length convolution with mirror padding at both ends.

    Padding repeats the edge sample (``d c b a | a b c d``), so every output
    is a convex combination of inputs. Returns the same type it was given.
    """
    values = signal.values if isinstance(signal, OpSignal) else np.asarray(signal, dtype=np.float64)
    if values.size == 0:
        raise DataError("cannot smooth an empty signal")
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.size == 1:
        out = values.copy()
    else:
        half = kernel.size // 2
        padded = np.pad(values, half, mode="symmetric")
        taps = np.lib.stride_tricks.sliding_window_view(padded, kernel.size)
        # written as v + sum(w * (neighbour - v)) so constants come back bit-exact
        out = values + (taps - values[:, None]) @ kernel[::-1]
        np.clip(out, values.min(), values.max(), out=out)
    if isinstance(signal, OpSignal):
        return OpSignal(signal.mid_times, out)
    return out


def find_peaks(signal: OpSignal | np.ndarray, threshold: float) -> np.ndarray:
    """Indices ``i`` with ``v[i] >= threshold``, ``v[i] > v[i-1]`` and ``v[i] >= v[i+1]``.

    Missing neighbours at the ends are treated as satisfied, so the first
    index of a plateau is reported and boundary samples can be peaks.
    """
    v = signal.values if isinstance(signal, OpSignal) else np.asarray(signal, dtype=np.float64)
    if v.size == 0:
        raise DataError("cannot find peaks in an empty signal")
    rising = np.ones(v.size, dtype=bool)
    rising[1:] = v[1:] > v[:-1]
    not_falling_after = np.ones(v.size, dtype=bool)
    not_falling_after[:-1] = v[:-1] >= v[1:]
    return np.flatnonzero((v >= threshold) & rising & not_falling_after)


def reconstruct_events(peaks, signal: OpSignal, width_events: float) -> EventSet:
    half = float(width_events) / 2.0
    mids = signal.mid_times[np.asarray(peaks, dtype=np.int64)]
    return EventSet(Interval(m - half, m + half) for m in mids)


def extract_events(signal: OpSignal, params: ExtractionParams, width_events: float) -> EventSet:
    smoothed = smooth(signal, gaussian_kernel(params.kernel_size, params.sigma))
    return reconstruct_events(find_peaks(smoothed, params.peak_threshold), smoothed, width_events)


@dataclass(frozen=True)
class OptimizationResult:
    params: ExtractionParams
    report: ScoreReport
    evaluated: int


def optimize_extraction(
    val_predictions: OpSignal,
    truth: EventSet,
    width_events: float,
    grids: Grids = Grids(),
    tolerance: float | None = None,
) -> OptimizationResult:
    """Exhaustive search over ``(kernel_size, sigma, threshold)`` for the best F1.

    Ties prefer smaller sigma, then smaller kernel. Among the thresholds
    that reach the best F1 for that ``(sigma, kernel_size)``, the middle one
    (upper median) is returned, which keeps the widest margin on both sides.
    ``tolerance`` defaults to ``width_events``.
    """
    if len(truth) == 0:
        raise DataError("cannot optimize against zero reference events")
    tol = float(width_events) if tolerance is None else float(tolerance)
    results: dict[tuple[float, int, float], ScoreReport] = {}
    for sigma in sorted(set(grids.sigmas)):
        for size in sorted(set(grids.kernel_sizes)):
            smoothed = smooth(val_predictions, gaussian_kernel(size, sigma))
            for thr in sorted(set(grids.thresholds)):
                peaks = find_peaks(smoothed, thr)
                pred = reconstruct_events(peaks, smoothed, width_events)
                results[(sigma, size, thr)] = evaluate(pred, truth, tol)
    best_f1 = max(r.f1 for r in results.values())
    tied = sorted(k for k, r in results.items() if r.f1 == best_f1)
    sigma, size, _ = tied[0]
    thresholds = [k[2] for k in tied if k[:2] == (sigma, size)]
    thr = thresholds[len(thresholds) // 2]
    return OptimizationResult(
        ExtractionParams(size, sigma, thr), results[(sigma, size, thr)], len(results)
    )


__all__ = [
    "ExtractionParams", "Grids", "gaussian_kernel", "smooth", "find_peaks",
    "reconstruct_events", "extract_events", "optimize_extraction", "OptimizationResult",
]
