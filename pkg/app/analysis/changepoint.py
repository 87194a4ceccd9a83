# app/analysis/changepoint.py
"""
Penalized mean-shift segmentation. Segment cost is the sum of squared
deviations from the segment mean; PELT is exact and `optimal_partitioning`
is the unpruned dynamic program it must agree with.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from app.analysis.timeseries import ReturnSeries
from app.core.errors import DomainError, InsufficientDataError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ChangepointResult:
    """`changepoints` are the indices where a new segment begins."""

    changepoints: List[int]
    segment_means: List[float]
    penalty: float
    cost: float
    n: int
    dates: Optional[np.ndarray] = None
    method: str = "pelt"

    @property
    def segments(self) -> List[Tuple[int, int]]:
        bounds = [0, *self.changepoints, self.n]
        return list(zip(bounds[:-1], bounds[1:]))

    @property
    def changepoint_dates(self) -> List[str]:
        if self.dates is None:
            return []
        return [str(self.dates[i]) for i in self.changepoints]

    def as_dict(self) -> dict:
        return {
            "changepoints": list(self.changepoints),
            "changepoint_dates": self.changepoint_dates,
            "segment_means": list(self.segment_means),
            "penalty": self.penalty,
            "cost": self.cost,
            "n": self.n,
            "method": self.method,
        }


class _SegmentCost:
    """O(1) SSE of y[a:b] from cumulative sums of the centered series."""

    def __init__(self, y: np.ndarray):
        centered = y - y.mean()
        self.s1 = np.concatenate([[0.0], np.cumsum(centered)])
        self.s2 = np.concatenate([[0.0], np.cumsum(centered * centered)])

    def __call__(self, a, b):
        length = b - a
        s1 = self.s1[b] - self.s1[a]
        return np.maximum((self.s2[b] - self.s2[a]) - s1 * s1 / length, 0.0)


def _values(s: ReturnSeries, penalty: Optional[float] = None) -> np.ndarray:
    y = s.values
    if len(y) < 2:
        raise InsufficientDataError(f"changepoint search needs at least 2 observations, got {len(y)}")
    if np.isnan(y).any():
        raise DomainError(f"{s.name}: changepoint search needs a series without missing values")
    if penalty is not None and not penalty > 0:
        raise DomainError(f"penalty must be positive, got {penalty}")
    return y


def _backtrack(last: np.ndarray, n: int) -> List[int]:
    points = []
    t = n
    while t > 0:
        t = int(last[t])
        if t > 0:
            points.append(t)
    return points[::-1]


def _result(s: ReturnSeries, changepoints: List[int], penalty: float, cost: _SegmentCost, method: str = "pelt") -> ChangepointResult:
    n = len(s)
    bounds = [0, *changepoints, n]
    means = [float(s.values[a:b].mean()) for a, b in zip(bounds[:-1], bounds[1:])]
    sse = float(sum(cost(a, b) for a, b in zip(bounds[:-1], bounds[1:])))
    return ChangepointResult(
        changepoints=changepoints,
        segment_means=means,
        penalty=float(penalty),
        cost=sse + penalty * len(changepoints),
        n=n,
        dates=s.dates,
        method=method,
    )


def optimal_partitioning(s: ReturnSeries, penalty: float) -> ChangepointResult:
    """Exhaustive O(n^2) dynamic program."""
    y = _values(s, penalty)
    n = len(y)
    cost = _SegmentCost(y)
    F = np.empty(n + 1)
    F[0] = -penalty
    last = np.zeros(n + 1, dtype=np.int64)
    for t in range(1, n + 1):
        candidates = np.arange(t)
        totals = F[:t] + cost(candidates, t) + penalty
        best = int(np.argmin(totals))
        F[t], last[t] = totals[best], best
    return _result(s, _backtrack(last, n), penalty, cost)


def pelt_mean_shift(s: ReturnSeries, penalty: float) -> ChangepointResult:
    """
    PELT: the optimal-partitioning recursion, dropping any candidate start
    that is already worse than the current optimum at t. Ties resolve to
    the earliest start, as in the exhaustive search.
    """
    y = _values(s, penalty)
    n = len(y)
    cost = _SegmentCost(y)
    F = np.empty(n + 1)
    F[0] = -penalty
    last = np.zeros(n + 1, dtype=np.int64)
    active = np.array([0], dtype=np.int64)
    for t in range(1, n + 1):
        partial_cost = F[active] + cost(active, t)
        totals = partial_cost + penalty
        best = int(np.argmin(totals))
        F[t], last[t] = totals[best], active[best]
        tol = 1e-9 * max(1.0, abs(F[t]))
        active = np.append(active[partial_cost <= F[t] + tol], t)
    changepoints = _backtrack(last, n)
    logger.debug(f"PELT on {s.name}: {len(changepoints)} changepoints at penalty {penalty:.6g}")
    return _result(s, changepoints, penalty, cost)


def _best_split(cost: _SegmentCost, a: int, b: int) -> Tuple[float, int]:
    """Largest SSE reduction from one split of y[a:b], and where."""
    if b - a < 2:
        return 0.0, -1
    taus = np.arange(a + 1, b)
    gains = cost(a, b) - cost(a, taus) - cost(taus, b)
    k = int(np.argmax(gains))
    return float(gains[k]), int(taus[k])


def binary_segmentation(s: ReturnSeries, n_splits: int) -> ChangepointResult:
    """Greedy: split the segment whose best split removes the most SSE, `n_splits` times."""
    y = _values(s)
    if n_splits < 1:
        raise DomainError(f"n_splits must be ≥ 1, got {n_splits}")
    cost = _SegmentCost(y)
    segments = [(0, len(y))]
    for _ in range(n_splits):
        scored = [(_best_split(cost, a, b), (a, b)) for a, b in segments]
        (gain, tau), (a, b) = max(scored, key=lambda item: item[0][0])
        if tau < 0 or gain <= 0:
            break
        segments.remove((a, b))
        segments += [(a, tau), (tau, b)]
    changepoints = sorted(a for a, _ in segments if a > 0)
    return _result(s, changepoints, 0.0, cost, method="binary_segmentation")


def best_single_split(s: ReturnSeries) -> ChangepointResult:
    return binary_segmentation(s, 1)


def default_penalty(s: ReturnSeries) -> float:
    """2 * sample variance * log n."""
    y = s.values
    return float(2.0 * np.var(y, ddof=1) * np.log(len(y)))


def detect_mean_shift(s: ReturnSeries, penalty: Optional[float] = None, max_changepoints: Optional[int] = None) -> ChangepointResult:
    """
    PELT at `penalty` (default: default_penalty). With `max_changepoints` = k,
    a PELT solution with any other count is replaced by binary segmentation
    to k splits, so k = 1 always reports the single dominant shift.
    A numerically constant series has no changepoints.
    """
    y = _values(s, penalty)
    # flat up to rounding, e.g. a correlation that is 1 everywhere
    if np.ptp(y) <= 1e-12 * max(1.0, float(np.abs(y).max())):
        return _result(s, [], penalty or 0.0, _SegmentCost(y), method="constant")
    if penalty is None:
        penalty = default_penalty(s)
    result = pelt_mean_shift(s, penalty)
    if max_changepoints is not None and len(result.changepoints) != max_changepoints:
        logger.info(f"{len(result.changepoints)} changepoints at penalty {penalty:.6g}; splitting to {max_changepoints}")
        reduced = binary_segmentation(s, max_changepoints)
        return _result(s, reduced.changepoints, penalty, _SegmentCost(y), method="binary_segmentation")
    return result
