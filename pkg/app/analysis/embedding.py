# app/analysis/embedding.py
from dataclasses import dataclass
from typing import List

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from app.analysis.timeseries import ReturnSeries
from app.core.errors import DomainError, InsufficientDataError


@dataclass(frozen=True)
class EmbeddingConfig:
    m: int = 4
    d: int = 2
    w: int = 50
    stride: int = 1

    def __post_init__(self):
        if self.m < 1 or self.d < 1 or self.w < 2 or self.stride < 1:
            raise DomainError(f"invalid embedding config m={self.m}, d={self.d}, w={self.w}, stride={self.stride}")

    @property
    def span(self) -> int:
        """Scalar observations consumed by one window."""
        return self.w + (self.m - 1) * self.d

    def window_count(self, n: int) -> int:
        vectors = n - (self.m - 1) * self.d
        if vectors < self.w:
            return 0
        return (vectors - self.w) // self.stride + 1


@dataclass(frozen=True, eq=False)
class DelayEmbedding:
    """Row t is (z_t, z_{t+d}, ..., z_{t+(m-1)d}); `dates` are those of the source series."""

    vectors: np.ndarray
    dates: np.ndarray
    m: int
    d: int

    def __len__(self) -> int:
        return len(self.vectors)


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray
    anchor_date: np.datetime64
    start: int = 0

    def __len__(self) -> int:
        return len(self.points)


def delay_embed(s: ReturnSeries, m: int, d: int) -> DelayEmbedding:
    if m < 1 or d < 1:
        raise DomainError(f"embedding needs m ≥ 1 and d ≥ 1, got m={m}, d={d}")
    span = (m - 1) * d + 1
    if len(s) < span:
        raise InsufficientDataError(f"series of length {len(s)} too short for m={m}, d={d}; need at least {span}")
    vectors = sliding_window_view(s.values, span)[:, ::d]
    return DelayEmbedding(vectors=np.ascontiguousarray(vectors), dates=s.dates, m=m, d=d)


def sliding_windows(embedding: DelayEmbedding, w: int, stride: int = 1) -> List[PointCloud]:
    """
    Window t = {x_t, ..., x_{t+w-1}}. Its anchor is the date of the last
    scalar observation any of its vectors uses, so window statistics are causal.
    """
    n = len(embedding)
    if w < 2:
        raise DomainError(f"window length must be at least 2, got {w}")
    if w > n:
        raise InsufficientDataError(f"window length {w} exceeds the {n} embedded vectors")
    lag = (embedding.m - 1) * embedding.d
    return [
        PointCloud(
            points=embedding.vectors[t:t + w],
            anchor_date=embedding.dates[t + w - 1 + lag],
            start=t,
        )
        for t in range(0, n - w + 1, stride)
    ]
