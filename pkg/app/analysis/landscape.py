# app/analysis/landscape.py
import logging
from dataclasses import dataclass
from functools import partial
from typing import List, Optional, Sequence

import numpy as np
from joblib import cpu_count
from scipy.integrate import trapezoid

from app.analysis.embedding import EmbeddingConfig, PointCloud, delay_embed, sliding_windows
from app.analysis.persistence import PersistenceDiagram, diagram_for_cloud
from app.analysis.timeseries import ReturnSeries
from app.core.errors import DomainError
from app.core.parallel import chunked, run_parallel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LandscapeConfig:
    i_max: int = 10
    grid_size: int = 500

    def __post_init__(self):
        if self.i_max < 1 or self.grid_size < 2:
            raise DomainError(f"invalid landscape config i_max={self.i_max}, grid_size={self.grid_size}")


@dataclass(frozen=True, eq=False)
class PersistenceLandscape:
    """layers[i] is lambda_(i+1) sampled on `grid`."""

    layers: np.ndarray
    grid: np.ndarray

    @property
    def i_max(self) -> int:
        return self.layers.shape[0]


@dataclass(frozen=True, eq=False)
class LandscapeNormSeries:
    dates: np.ndarray
    values: np.ndarray
    closed_form: np.ndarray
    n_pairs: np.ndarray
    p: float = 1.0
    diagrams: Optional[List[PersistenceDiagram]] = None

    def __len__(self) -> int:
        return len(self.values)

    def as_series(self) -> ReturnSeries:
        return ReturnSeries(self.dates, self.values, name="l1_grid")


def landscape_from_diagram(diag: PersistenceDiagram, grid_size: int = 500, i_max: int = 10) -> PersistenceLandscape:
    if not diag.is_finite():
        raise DomainError("landscape needs a finite diagram")
    if grid_size < 2 or i_max < 1:
        raise DomainError("grid_size must be ≥ 2 and i_max ≥ 1")
    if len(diag) == 0:
        grid = np.linspace(0.0, 1.0, grid_size)
        return PersistenceLandscape(layers=np.zeros((i_max, grid_size)), grid=grid)

    grid = np.linspace(diag.births.min(), diag.deaths.max(), grid_size)
    b = diag.births[:, None]
    d = diag.deaths[:, None]
    tents = np.maximum(np.minimum(grid - b, d - grid), 0.0)
    tents = -np.sort(-tents, axis=0)
    layers = np.zeros((i_max, grid_size))
    k = min(i_max, len(tents))
    layers[:k] = tents[:k]
    return PersistenceLandscape(layers=layers, grid=grid)


def l1_closed_form(diag: PersistenceDiagram) -> float:
    """||lambda||_1 = 1/4 * sum (d - b)^2 over all pairs."""
    if not diag.is_finite():
        raise DomainError("closed-form L1 needs finite deaths; resolve essential classes first")
    return float(0.25 * np.sum(diag.persistence ** 2))


def lp_norm_grid(land: PersistenceLandscape, p: float = 1.0) -> float:
    if p < 1:
        raise DomainError(f"norm order must be ≥ 1, got {p}")
    per_layer = trapezoid(np.abs(land.layers) ** p, land.grid, axis=1)
    return float(np.sum(per_layer) ** (1.0 / p))


def _window_norms(clouds: Sequence[PointCloud], cfg: LandscapeConfig):
    out = []
    for cloud in clouds:
        diag = diagram_for_cloud(cloud)
        land = landscape_from_diagram(diag, cfg.grid_size, cfg.i_max)
        out.append((lp_norm_grid(land, 1.0), l1_closed_form(diag), diag))
    return out


def l1_series(windows: Sequence[PointCloud], cfg: LandscapeConfig = LandscapeConfig(), workers: int = 1, keep_diagrams: bool = False) -> LandscapeNormSeries:
    """
    Grid L1 norm per window with the closed form alongside, in anchor order.
    Windows are split into contiguous batches, one per worker.
    """
    windows = list(windows)
    if not windows:
        raise DomainError("l1_series needs at least one window")
    n_batches = 1 if workers == 1 else 4 * (workers if workers > 0 else cpu_count())
    batches = chunked(windows, n_batches)
    results = [r for batch in run_parallel(partial(_window_norms, cfg=cfg), batches, workers) for r in batch]
    grid = np.array([r[0] for r in results])
    closed = np.array([r[1] for r in results])
    gap = np.abs(grid - closed) / np.maximum(closed, 1e-12)
    if len(gap) and gap.max() > 0.02:
        logger.info(f"Grid/closed-form L1 gap up to {gap.max():.3%} (i_max={cfg.i_max}, grid_size={cfg.grid_size})")
    return LandscapeNormSeries(
        dates=np.array([w.anchor_date for w in windows]),
        values=grid,
        closed_form=closed,
        n_pairs=np.array([len(r[2]) for r in results]),
        diagrams=[r[2] for r in results] if keep_diagrams else None,
    )


def norm_series(z: ReturnSeries, embedding: EmbeddingConfig, landscape: LandscapeConfig, workers: int = 1, keep_diagrams: bool = False) -> LandscapeNormSeries:
    """delay_embed -> sliding_windows -> l1_series for one scalar series."""
    windows = sliding_windows(delay_embed(z, embedding.m, embedding.d), embedding.w, embedding.stride)
    return l1_series(windows, landscape, workers=workers, keep_diagrams=keep_diagrams)
