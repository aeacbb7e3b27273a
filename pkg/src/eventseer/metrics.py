"""Event matching, precision/recall/F1 and the time-shift histogram.

Two events match when their mid-times differ by at most ``tolerance``
seconds. Pairs are first accepted greedily in order of
``(|dt|, predicted start, true start)``. The greedy result is then extended
with augmenting paths so the number of pairs is always the maximum
achievable; on well-separated events the augmentation never fires and the
greedy pairs are returned unchanged.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import ConfigError, EventSet, Interval


@dataclass(frozen=True)
class MatchPair:
    predicted: Interval
    truth: Interval
    delta_t: float


@dataclass(frozen=True)
class MatchResult:
    pairs: tuple[MatchPair, ...]
    unmatched_predicted: int
    unmatched_truth: int
    tolerance: float

    @property
    def delta_ts(self) -> np.ndarray:
        return np.array([p.delta_t for p in self.pairs], dtype=np.float64)


@dataclass(frozen=True)
class ScoreReport:
    precision: float
    recall: float
    f1: float
    true_positive: int
    false_positive: int
    false_negative: int
    tolerance: float
    delta_t_mean: float
    delta_t_std: float

    def to_dict(self) -> dict:
        return asdict(self)


def _candidates(pm: np.ndarray, tm: np.ndarray, tolerance: float):
    """All ``(|dt|, p_start, t_start, i, j)`` within tolerance, via a sorted sweep."""
    order = np.argsort(tm, kind="stable")
    tsorted = tm[order]
    out = []
    for i, m in enumerate(pm):
        lo = np.searchsorted(tsorted, m - tolerance, side="left")
        hi = np.searchsorted(tsorted, m + tolerance, side="right")
        for k in range(lo, hi):
            j = int(order[k])
            d = abs(m - tm[j])
            if d <= tolerance:
                out.append((d, i, j))
    return out


def greedy_pairs(predicted: EventSet, truth: EventSet, tolerance: float) -> dict[int, int]:
    """Greedy one-to-one assignment ``{predicted index: truth index}``."""
    pm, tm = predicted.mids, truth.mids
    ps, ts = predicted.starts, truth.starts
    cands = _candidates(pm, tm, tolerance)
    cands.sort(key=lambda c: (c[0], ps[c[1]], ts[c[2]], c[1], c[2]))
    p2t: dict[int, int] = {}
    used_t: set[int] = set()
    for _, i, j in cands:
        if i not in p2t and j not in used_t:
            p2t[i] = j
            used_t.add(j)
    return p2t


def _augment(p2t: dict[int, int], adj: list[list[int]]) -> dict[int, int]:
    t2p = {j: i for i, j in p2t.items()}

    def try_assign(i: int, seen: set[int]) -> bool:
        for j in adj[i]:
            if j in seen:
                continue
            seen.add(j)
            if j not in t2p or try_assign(t2p[j], seen):
                t2p[j] = i
                return True
        return False

    matched = set(p2t)
    for i in range(len(adj)):
        if i not in matched and try_assign(i, set()):
            matched.add(i)
    return {i: j for j, i in t2p.items()}


def match_events(predicted: EventSet, truth: EventSet, tolerance: float) -> MatchResult:
    tolerance = float(tolerance)
    if not tolerance > 0:
        raise ConfigError(f"tolerance must be positive, got {tolerance}")
    p2t = greedy_pairs(predicted, truth, tolerance)
    if len(p2t) < min(len(predicted), len(truth)):
        pm, tm = predicted.mids, truth.mids
        adj: list[list[int]] = [[] for _ in range(len(predicted))]
        cands = sorted(_candidates(pm, tm, tolerance), key=lambda c: (c[0], c[1], c[2]))
        for _, i, j in cands:
            adj[i].append(j)
        p2t = _augment(p2t, adj)
    pairs = tuple(
        MatchPair(predicted[i], truth[j], predicted[i].mid - truth[j].mid)
        for i, j in sorted(p2t.items())
    )
    return MatchResult(
        pairs=pairs,
        unmatched_predicted=len(predicted) - len(pairs),
        unmatched_truth=len(truth) - len(pairs),
        tolerance=tolerance,
    )


def prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """Precision, recall and F1 with 0/0 taken as 0."""
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def f1_from_pr(precision: float, recall: float) -> float:
    s = precision + recall
    return 2 * precision * recall / s if s else 0.0


def score(match: MatchResult) -> ScoreReport:
    tp = len(match.pairs)
    fp = match.unmatched_predicted
    fn = match.unmatched_truth
    precision, recall, f1 = prf(tp, fp, fn)
    dts = match.delta_ts
    mean = float(dts.mean()) if tp else 0.0
    std = float(dts.std()) if tp else 0.0
    return ScoreReport(precision, recall, f1, tp, fp, fn, match.tolerance, mean, std)


def evaluate(predicted: EventSet, truth: EventSet, tolerance: float) -> ScoreReport:
    return score(match_events(predicted, truth, tolerance))


@dataclass(frozen=True)
class Histogram:
    lower_edges: np.ndarray = field(default_factory=lambda: np.zeros(0))
    counts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __len__(self) -> int:
        return self.counts.shape[0]


def delta_t_histogram(match: MatchResult | np.ndarray, bin_width: float) -> Histogram:
    """Counts of signed mid-time shifts in bins of ``bin_width`` centered on multiples of it.

    Bin ``k`` covers ``[(k - 1/2) w, (k + 1/2) w)`` so zero sits at a bin
    center. Only occupied bins are reported.
    """
    bin_width = float(bin_width)
    if not (bin_width > 0 and math.isfinite(bin_width)):
        raise ConfigError(f"bin_width must be positive, got {bin_width}")
    dts = match.delta_ts if isinstance(match, MatchResult) else np.asarray(match, dtype=np.float64)
    if dts.size == 0:
        return Histogram()
    k = np.floor(dts / bin_width + 0.5).astype(np.int64)
    bins, counts = np.unique(k, return_counts=True)
    return Histogram((bins - 0.5) * bin_width, counts.astype(np.int64))
