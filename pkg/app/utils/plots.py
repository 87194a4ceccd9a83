# app/utils/plots.py
"""
Static SVG figures. Output is byte-stable: fixed hash salt for element ids,
no creation date, and the config digest recorded in the SVG metadata.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from app.analysis.changepoint import ChangepointResult  # noqa: E402
from app.analysis.surrogate import ExceedanceReport, NullEnvelope, quantile_label  # noqa: E402
from app.analysis.timeseries import ACFResult, ReturnSeries  # noqa: E402

logger = logging.getLogger(__name__)

COLOR_PRIMARY = "#1f4e79"
COLOR_SECONDARY = "#c55a11"
COLOR_NULL = "#7f7f7f"

STYLE = {
    "svg.hashsalt": "topovol",
    "svg.fonttype": "none",
    "font.family": "sans-serif",
    "font.size": 10,
    "axes.labelsize": 11,
    "axes.titlesize": 12,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.2,
}


def _save(fig, path: Path, digest: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", bbox_inches="tight", metadata={"Date": None, "Description": f"config-digest {digest}"})
    plt.close(fig)
    logger.debug(f"Wrote figure {path}")
    return path


def line_plot(series: Sequence[ReturnSeries], path: Path, digest: str, title: str, ylabel: str, labels: Optional[Sequence[str]] = None) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(10, 4))
        colors = [COLOR_PRIMARY, COLOR_SECONDARY]
        for i, s in enumerate(series):
            label = labels[i] if labels else s.name
            ax.plot(s.dates, s.values, linewidth=0.8, color=colors[i % 2], label=label)
        if len(series) > 1:
            ax.legend(loc="upper left", frameon=False)
        ax.set_title(title)
        ax.set_ylabel(ylabel)
        return _save(fig, path, digest)


def correlation_plot(corr: ReturnSeries, changepoints: ChangepointResult, path: Path, digest: str, window: int) -> Path:
    """Rolling correlation with the segment means of the changepoint fit."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(10, 4))
        ax.plot(corr.dates, corr.values, linewidth=0.8, color=COLOR_PRIMARY, label="rolling correlation")
        for (a, b), level in zip(changepoints.segments, changepoints.segment_means):
            ax.hlines(level, corr.dates[a], corr.dates[b - 1], color=COLOR_SECONDARY, linewidth=1.5)
        for i in changepoints.changepoints:
            ax.axvline(corr.dates[i], color=COLOR_SECONDARY, linestyle="--", linewidth=0.8)
        ax.axhline(0.0, color="black", linewidth=0.5)
        ax.set_ylim(-1.05, 1.05)
        ax.set_title(f"{window}-day rolling correlation, {len(changepoints.changepoints)} changepoint(s)")
        ax.legend(loc="lower left", frameon=False)
        return _save(fig, path, digest)


def envelope_plot(env: NullEnvelope, report: ExceedanceReport, path: Path, digest: str) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(10, 4))
        ax.fill_between(env.dates, env.lower, env.upper, color=COLOR_NULL, alpha=0.35, linewidth=0,
                        label=f"{env.kind} null {quantile_label(env.q_low)}-{quantile_label(env.q_high)}")
        ax.plot(env.dates, env.mean, color=COLOR_NULL, linewidth=0.8, label="null mean")
        ax.plot(report.dates, report.observed, color=COLOR_PRIMARY, linewidth=0.8, label="observed")
        ax.set_title(
            f"L1 norm vs {env.kind} null ({env.count} realizations): "
            f"{report.frac_below:.1%} below, {report.frac_above:.1%} above"
        )
        ax.legend(loc="upper left", frameon=False)
        return _save(fig, path, digest)


def regime_boxplot(groups: Dict[str, np.ndarray], path: Path, digest: str) -> Path:
    labels: List[str] = [k for k, v in groups.items() if len(v)]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(8, 4))
        if labels:
            ax.boxplot([groups[k] for k in labels], tick_labels=labels, whis=1.5)
        ax.set_title("L1 landscape norm by Fear & Greed regime")
        ax.set_ylabel("L1 norm")
        return _save(fig, path, digest)


def acf_plot(result: ACFResult, path: Path, digest: str) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(8, 4))
        ax.vlines(result.lags, 0.0, result.values, color=COLOR_PRIMARY)
        ax.axhspan(-result.confidence_halfwidth, result.confidence_halfwidth, color=COLOR_NULL, alpha=0.25)
        ax.axhline(0.0, color="black", linewidth=0.5)
        ax.set_xlabel("lag (days)")
        ax.set_title("ACF of residualized L1 norm")
        return _save(fig, path, digest)
