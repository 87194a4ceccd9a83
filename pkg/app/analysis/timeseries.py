# app/analysis/timeseries.py
"""
Time-series container and the statistics run on it: log returns,
standardization, causal rolling statistics, rolling correlation, ACF,
OLS residualization and Fear & Greed regimes.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import statsmodels.api as sm
from numpy.lib.stride_tricks import sliding_window_view
from statsmodels.tsa.stattools import acf as sm_acf

from app.core.errors import (
    CollinearityError,
    DomainError,
    InsufficientDataError,
    ZeroVarianceError,
)

logger = logging.getLogger(__name__)

# (upper bound inclusive, label); provider convention
SENTIMENT_BINS: Tuple[Tuple[int, str], ...] = (
    (24, "Extreme Fear"),
    (44, "Fear"),
    (54, "Neutral"),
    (74, "Greed"),
    (100, "Extreme Greed"),
)
REGIME_ORDER = [label for _, label in SENTIMENT_BINS]


def _as_dates(values) -> np.ndarray:
    return np.asarray(pd.to_datetime(np.asarray(values)).values.astype("datetime64[D]"))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ReturnSeries:
    """
    Daily scalar series. NaN marks a missing derived value (e.g. an undefined
    correlation); ingestion never lets one through. `dropped` counts rows
    discarded while loading.
    """

    dates: np.ndarray
    values: np.ndarray
    name: str = "value"
    dropped: int = 0

    def __post_init__(self):
        dates = _frozen(_as_dates(self.dates))
        values = _frozen(np.asarray(self.values, dtype=float))
        if dates.ndim != 1 or values.ndim != 1 or len(dates) != len(values):
            raise DomainError(f"{self.name}: dates and values must be 1-D of equal length")
        if len(dates) > 1 and not np.all(dates[1:] > dates[:-1]):
            bad = int(np.argmin(dates[1:] > dates[:-1])) + 1
            raise DomainError(f"{self.name}: dates not strictly increasing at index {bad}", index=bad)
        if np.isinf(values).any():
            raise DomainError(f"{self.name}: infinite value at index {int(np.argmax(np.isinf(values)))}")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    def rename(self, name: str) -> "ReturnSeries":
        return ReturnSeries(self.dates, self.values, name=name, dropped=self.dropped)

    def with_values(self, values, name: Optional[str] = None) -> "ReturnSeries":
        return ReturnSeries(self.dates, values, name=name or self.name)

    def dropna(self) -> "ReturnSeries":
        keep = ~np.isnan(self.values)
        return ReturnSeries(self.dates[keep], self.values[keep], name=self.name)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"date": pd.to_datetime(self.dates).strftime("%Y-%m-%d"), self.name: self.values})

    @classmethod
    def from_frame(cls, df: pd.DataFrame, column: str, date_column: str = "date") -> "ReturnSeries":
        return cls(df[date_column].to_numpy(), df[column].to_numpy(dtype=float), name=column)


@dataclass(frozen=True, eq=False)
class SentimentSeries:
    dates: np.ndarray
    values: np.ndarray
    classifications: Optional[Tuple[str, ...]] = None
    name: str = "sentiment"

    def __post_init__(self):
        dates = _frozen(_as_dates(self.dates))
        values = _frozen(np.asarray(self.values, dtype=int))
        if len(dates) != len(values):
            raise DomainError("sentiment: dates and values differ in length")
        if len(dates) > 1 and not np.all(dates[1:] > dates[:-1]):
            raise DomainError("sentiment: dates not strictly increasing")
        out_of_range = (values < 0) | (values > 100)
        if out_of_range.any():
            idx = int(np.argmax(out_of_range))
            raise DomainError(f"sentiment value {values[idx]} outside [0, 100] at index {idx}", index=idx)
        if self.classifications is not None and len(self.classifications) != len(values):
            raise DomainError("sentiment: one classification per observation required")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    def as_series(self) -> ReturnSeries:
        return ReturnSeries(self.dates, self.values.astype(float), name=self.name)


@dataclass(frozen=True, eq=False)
class RegressionResult:
    coefficients: np.ndarray
    covariate_names: List[str]
    residuals: ReturnSeries
    r_squared: float
    window: int = 0

    def as_dict(self) -> Dict[str, float]:
        names = ["const"] + list(self.covariate_names)
        return {name: float(b) for name, b in zip(names, self.coefficients)}


@dataclass(frozen=True, eq=False)
class ACFResult:
    lags: np.ndarray
    values: np.ndarray
    confidence_halfwidth: float
    n: int = 0

    def significant(self) -> np.ndarray:
        """Lags ≥ 1 whose autocorrelation leaves the ±band."""
        mask = np.abs(self.values) > self.confidence_halfwidth
        mask[0] = False
        return self.lags[mask]


# === Alignment ===

def align(*series: ReturnSeries) -> List[ReturnSeries]:
    """Inner join on calendar dates. Symmetric in its arguments."""
    common = series[0].dates
    for s in series[1:]:
        common = np.intersect1d(common, s.dates, assume_unique=True)
    out = []
    for s in series:
        keep = np.isin(s.dates, common, assume_unique=True)
        n_drop = int((~keep).sum())
        if n_drop:
            logger.info(f"Alignment dropped {n_drop} dates from '{s.name}'")
        out.append(ReturnSeries(s.dates[keep], s.values[keep], name=s.name))
    return out


# === Elementary transforms ===

def log_returns(prices: ReturnSeries) -> ReturnSeries:
    if len(prices) < 2:
        raise InsufficientDataError(f"insufficient observations: need at least 2 prices, got {len(prices)}")
    p = prices.values
    non_positive = p <= 0
    if non_positive.any():
        idx = int(np.argmax(non_positive))
        raise DomainError(f"non-positive price {p[idx]} at index {idx}", index=idx)
    return ReturnSeries(prices.dates[1:], np.log(p[1:] / p[:-1]), name="log_return")


def standardize(s: ReturnSeries) -> ReturnSeries:
    if len(s) < 2:
        raise InsufficientDataError("insufficient observations: standardization needs at least 2 values")
    x = s.values
    sd = x.std(ddof=1)
    if np.ptp(x) == 0 or not sd > 0:
        raise ZeroVarianceError(f"zero variance in '{s.name}'")
    return s.with_values((x - x.mean()) / sd)


def rolling_stat(s: ReturnSeries, window: int, kind: Literal["mean", "std"] = "mean") -> ReturnSeries:
    """Trailing-window statistic indexed by the window END date."""
    if window < 1:
        raise DomainError("window must be positive")
    if window > len(s):
        raise InsufficientDataError(f"window {window} exceeds series length {len(s)}")
    view = sliding_window_view(s.values, window)
    if kind == "mean":
        values = view.mean(axis=1)
    elif kind == "std":
        if window < 2:
            raise DomainError("rolling std needs window ≥ 2")
        values = view.std(axis=1, ddof=1)
    else:
        raise DomainError(f"unknown rolling statistic '{kind}'")
    return ReturnSeries(s.dates[window - 1:], values, name=f"{s.name}_roll{kind}{window}")


def rolling_correlation(a: ReturnSeries, b: ReturnSeries, window: int) -> ReturnSeries:
    """
    Trailing Pearson correlation on the inner-joined dates.
    Windows where either side is constant come back as NaN.
    """
    a, b = align(a, b)
    if window < 2 or window > len(a):
        raise InsufficientDataError(f"window {window} invalid for joined length {len(a)}")
    va = sliding_window_view(a.values, window)
    vb = sliding_window_view(b.values, window)
    da = va - va.mean(axis=1, keepdims=True)
    db = vb - vb.mean(axis=1, keepdims=True)
    sxy = (da * db).sum(axis=1)
    sxx = (da * da).sum(axis=1)
    syy = (db * db).sum(axis=1)
    denom = np.sqrt(sxx * syy)
    denom[(np.ptp(va, axis=1) == 0) | (np.ptp(vb, axis=1) == 0)] = 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.where(denom > 0, sxy / np.where(denom > 0, denom, 1.0), np.nan)
    corr = np.clip(corr, -1.0, 1.0)
    return ReturnSeries(a.dates[window - 1:], corr, name="rolling_correlation")


def acf(s: ReturnSeries, max_lag: int) -> ACFResult:
    """Biased sample autocorrelation with the ±1.96/√n white-noise band."""
    x = s.values
    n = len(x)
    if max_lag < 1 or max_lag >= n:
        raise InsufficientDataError(f"max_lag {max_lag} must lie in [1, {n - 1}]")
    if np.ptp(x) == 0:
        raise ZeroVarianceError(f"zero variance in '{s.name}'")
    values = sm_acf(x, nlags=max_lag, adjusted=False, fft=False, missing="raise")
    values[0] = 1.0
    return ACFResult(
        lags=np.arange(max_lag + 1),
        values=np.clip(values, -1.0, 1.0),
        confidence_halfwidth=1.96 / np.sqrt(n),
        n=n,
    )


# === Regression ===

def _collinear_columns(X: np.ndarray, names: List[str], tol: float) -> List[str]:
    _, s, vt = np.linalg.svd(X, full_matrices=False)
    null_vectors = vt[s < tol * s[0]]
    involved = np.any(np.abs(null_vectors) > 1e-8, axis=0)
    return [name for name, flag in zip(names, involved) if flag]


def ols_fit(y: ReturnSeries, covariates: Sequence[ReturnSeries], rank_tol: float = 1e-10) -> RegressionResult:
    """
    Least squares with intercept on the inner-joined dates, solved by QR.
    Rank is checked by SVD first so a degenerate design fails loudly.
    """
    joined = align(y, *covariates)
    y, covs = joined[0], joined[1:]
    n, k = len(y), len(covs)
    if n <= k + 1:
        raise InsufficientDataError(f"joined length {n} too short for {k} covariates plus intercept")
    names = ["const"] + [c.name for c in covs]
    X = np.column_stack([np.ones(n)] + [c.values for c in covs])
    s = np.linalg.svd(X, compute_uv=False)
    if s[-1] < rank_tol * s[0]:
        offending = _collinear_columns(X, names, rank_tol)
        raise CollinearityError(f"design matrix is rank deficient; collinear columns: {', '.join(offending)}", offending)
    fit = sm.OLS(y.values, X).fit(method="qr")
    residuals = y.values - X @ fit.params
    ss_res = float(residuals @ residuals)
    centred = y.values - y.values.mean()
    ss_tot = float(centred @ centred)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RegressionResult(
        coefficients=np.asarray(fit.params),
        covariate_names=[c.name for c in covs],
        residuals=ReturnSeries(y.dates, residuals, name="residual"),
        r_squared=float(min(max(r2, 0.0), 1.0)),
    )


def residualize_l1(l1: ReturnSeries, sigma: ReturnSeries, sentiment: SentimentSeries, window: int = 30) -> RegressionResult:
    """
    Regress L1(t) on the rolling mean of filtered volatility, the rolling mean
    of sentiment and the rolling std of sentiment (all trailing, length `window`).
    Covariates enter on their raw scale.
    """
    sent = sentiment.as_series()
    common = align(l1, sigma, sent)[0]
    if len(common) <= window + 4:
        raise InsufficientDataError(
            f"common date range has {len(common)} days; need more than window + 4 = {window + 4}"
        )
    sigma_bar = rolling_stat(sigma, window, "mean").rename("sigma_bar")
    f_bar = rolling_stat(sent, window, "mean").rename("sentiment_bar")
    f_sd = rolling_stat(sent, window, "std").rename("sentiment_sd")
    result = ols_fit(l1, [sigma_bar, f_bar, f_sd])
    return RegressionResult(
        coefficients=result.coefficients,
        covariate_names=result.covariate_names,
        residuals=result.residuals,
        r_squared=result.r_squared,
        window=window,
    )


# === Sentiment regimes ===

def sentiment_label(value: int) -> str:
    if value < 0 or value > 100:
        raise DomainError(f"sentiment value {value} outside [0, 100]")
    for upper, label in SENTIMENT_BINS:
        if value <= upper:
            return label
    raise AssertionError("unreachable")


def classify_sentiment(s: SentimentSeries) -> SentimentSeries:
    """Keep provider labels when present, otherwise bin the numeric value."""
    if s.classifications is not None:
        return s
    labels = tuple(sentiment_label(int(v)) for v in s.values)
    return SentimentSeries(s.dates, s.values, classifications=labels, name=s.name)


@dataclass(frozen=True, eq=False)
class RegimeSummary:
    regime: str
    count: int
    median: float
    q1: float
    q3: float
    whisker_low: float
    whisker_high: float
    n_outliers: int
    values: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))


def regime_summary(l1: ReturnSeries, sentiment: SentimentSeries) -> List[RegimeSummary]:
    """Box-plot statistics of L1 values grouped by same-day sentiment regime."""
    labelled = classify_sentiment(sentiment)
    frame = pd.DataFrame({"date": l1.dates, "l1": l1.values}).merge(
        pd.DataFrame({"date": labelled.dates, "regime": list(labelled.classifications)}),
        on="date",
        how="inner",
    )
    summaries = []
    seen = list(dict.fromkeys(REGIME_ORDER + sorted(set(frame["regime"]) - set(REGIME_ORDER))))
    for regime in seen:
        x = frame.loc[frame["regime"] == regime, "l1"].to_numpy()
        if len(x) == 0:
            continue
        q1, median, q3 = np.quantile(x, [0.25, 0.5, 0.75])
        iqr = q3 - q1
        lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
        inside = x[(x >= lo_fence) & (x <= hi_fence)]
        summaries.append(
            RegimeSummary(
                regime=regime,
                count=len(x),
                median=float(median),
                q1=float(q1),
                q3=float(q3),
                whisker_low=float(inside.min()),
                whisker_high=float(inside.max()),
                n_outliers=int(len(x) - len(inside)),
                values=x,
            )
        )
    return summaries
