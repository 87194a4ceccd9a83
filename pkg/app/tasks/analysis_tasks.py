# app/tasks/analysis_tasks.py

import os
import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Tuple

import numpy as np
import pandas as pd
from celery import Celery

from app.analysis import changepoint, surrogate, svmodel
from app.analysis.landscape import LandscapeNormSeries, norm_series
from app.analysis.timeseries import (
    ReturnSeries,
    SentimentSeries,
    acf,
    align,
    log_returns,
    regime_summary,
    residualize_l1,
    rolling_correlation,
    standardize,
)
from app.core.config import AnalysisConfig
from app.core.errors import PipelineError, ZeroVarianceError
from app.core.rng import derive_seed
from app.schemas.reports import (
    ChangepointReport,
    ExceedanceSummary,
    RegressionReport,
    SVSummary,
)
from app.utils import plots
from app.utils.parser import load_prices, load_sentiment, read_series
from app.utils.writers import write_json, write_manifest, write_table, write_text

logger = logging.getLogger(__name__)

BROKER_URL = os.getenv("CELERY_BROKER_URL")

celery_app = Celery(
    "topovol",
    broker=BROKER_URL,
    backend=os.getenv("CELERY_RESULT_BACKEND"),
)

celery_app.conf.update(
    task_track_started=True,
    worker_prefetch_multiplier=1,  # stages are long-running
    task_acks_late=True,
    task_always_eager=BROKER_URL is None,
)

FIGURES = "figures"
EFFECTIVE_CONFIG = "effective_config.env"


def _figure(config: AnalysisConfig, name: str) -> Path:
    return config.out / FIGURES / f"{name}.svg"


def _date_strings(dates: np.ndarray) -> List[str]:
    return [str(d) for d in np.asarray(dates, dtype="datetime64[D]")]


# === Inputs ===

def _prices(config: AnalysisConfig) -> ReturnSeries:
    if config.prices is None:
        raise PipelineError("no price file configured (--prices)")
    return load_prices(config.prices, config.price_column)[0]


def _sentiment(config: AnalysisConfig) -> SentimentSeries:
    if config.sentiment is None:
        raise PipelineError("no sentiment file configured (--sentiment)")
    return load_sentiment(config.sentiment)[0]


def standardized_returns(prices: ReturnSeries) -> ReturnSeries:
    """
    Full-sample standardized log returns. A zero-variance return series is
    only demeaned, so every window collapses to a point and every norm is 0.
    """
    r = log_returns(prices)
    try:
        return standardize(r).rename("z")
    except ZeroVarianceError:
        logger.warning("Log returns have zero variance; demeaning only")
        return r.with_values(r.values - r.values.mean(), name="z")


def _require(path: Path, stage: str) -> Path:
    if not path.exists():
        raise PipelineError(f"{path.name} not found in {path.parent}; run `{stage}` first")
    return path


def read_norms(out: Path) -> LandscapeNormSeries:
    df = pd.read_csv(_require(out / "l1_norm.csv", "tda"), float_precision="round_trip")
    return LandscapeNormSeries(
        dates=pd.to_datetime(df["anchor_date"]).to_numpy().astype("datetime64[D]"),
        values=df["l1_grid"].to_numpy(dtype=float),
        closed_form=df["l1_closed_form"].to_numpy(dtype=float),
        n_pairs=df["n_pairs"].to_numpy(dtype=int),
    )


def read_sigma(out: Path) -> ReturnSeries:
    return read_series(_require(out / "filtered_volatility.csv", "sv"), "sigma_hat")


# === Stages ===

def run_ingest(config: AnalysisConfig) -> Dict[str, Any]:
    """Cleaned price, log-return and sentiment tables plus the return plot."""
    out = config.out
    if config.prices is None:
        raise PipelineError("no price file configured (--prices)")
    prices, price_summary = load_prices(config.prices, config.price_column)
    returns = log_returns(prices)
    write_table(prices.to_frame(), out / "prices.csv")
    write_table(returns.to_frame(), out / "log_returns.csv")
    write_json(price_summary, out / "ingest_prices.json")
    plots.line_plot([returns], _figure(config, "log_returns"), config.digest, "Daily log returns", "log return")
    summary = {"prices": price_summary.model_dump()}

    if config.sentiment is not None:
        sentiment, sentiment_summary = load_sentiment(config.sentiment)
        frame = pd.DataFrame({
            "date": _date_strings(sentiment.dates),
            "value": sentiment.values,
            "classification": list(sentiment.classifications or [""] * len(sentiment)),
        })
        write_table(frame, out / "sentiment.csv")
        write_json(sentiment_summary, out / "ingest_sentiment.json")
        summary["sentiment"] = sentiment_summary.model_dump()
    return summary


def run_tda(config: AnalysisConfig) -> LandscapeNormSeries:
    """Standardized returns -> delay embedding -> windows -> L1 landscape norms."""
    z = standardized_returns(_prices(config))
    norms = norm_series(z, config.embedding, config.landscape, workers=config.workers, keep_diagrams=True)
    logger.info(f"TDA: {len(norms)} windows (m={config.m}, d={config.d}, w={config.window})")

    table = pd.DataFrame({
        "anchor_date": _date_strings(norms.dates),
        "l1_grid": norms.values,
        "l1_closed_form": norms.closed_form,
        "n_pairs": norms.n_pairs,
    })
    write_table(table, config.out / "l1_norm.csv")
    dump = "".join(
        f"# {day}\n{diagram.to_text()}" for day, diagram in zip(_date_strings(norms.dates), norms.diagrams)
    )
    write_text(dump, config.out / "diagrams.tsv")
    plots.line_plot([norms.as_series()], _figure(config, "l1_norm"), config.digest, "L1 norm of the H1 persistence landscape", "L1 norm")
    return norms


def run_sv(config: AnalysisConfig) -> SVSummary:
    """IF2 on standardized returns, then one long particle filter at the estimate."""
    z = standardized_returns(_prices(config))
    settings = config.if2
    init = svmodel.initial_params(z)
    fit = svmodel.if2_estimate(z, init, settings, workers=config.workers)
    fo = svmodel.particle_filter(z, fit.params, settings.filter_particles, derive_seed(config.seed, "sv", "filter"))

    table = pd.DataFrame({
        "date": _date_strings(fo.dates),
        "h_hat": fo.filtered_h,
        "V_hat": fo.filtered_variance,
        "sigma_hat": fo.filtered_sigma,
    })
    write_table(table, config.out / "filtered_volatility.csv")
    summary = SVSummary(
        params=fit.params.as_dict(),
        log_likelihood=fit.log_likelihood,
        filter_log_likelihood=fo.log_likelihood,
        replicate_log_likelihoods=fit.replicate_log_likelihoods,
        best_replicate=fit.best_replicate,
        failures=fit.failures,
        iterations=settings.iterations,
        estimation_particles=settings.estimation_particles,
        filter_particles=settings.filter_particles,
        seed=settings.seed,
    )
    write_json(summary, config.out / "sv_summary.json")
    plots.line_plot([svmodel.filtered_volatility(fo)], _figure(config, "sv_sigma"), config.digest, "Filtered stochastic volatility", "sigma_hat")
    return summary


def compare_series(l1: ReturnSeries, sigma: ReturnSeries, config: AnalysisConfig) -> Tuple[List[ReturnSeries], ReturnSeries, changepoint.ChangepointResult, int]:
    """Standardized overlay, rolling correlation and its mean-shift changepoints."""
    l1_std = standardize(l1).rename("l1_std")
    sigma_std = standardize(sigma).rename("sigma_std")
    l1_std, sigma_std = align(l1_std, sigma_std)
    if len(l1_std) == 0:
        raise PipelineError("L1 norms and filtered volatility share no dates")

    corr = rolling_correlation(l1_std, sigma_std, config.roll_window)
    defined = corr.dropna()
    undefined = len(corr) - len(defined)
    if undefined:
        logger.warning(f"{undefined} rolling-correlation windows undefined (constant input); excluded from changepoint search")
    result = changepoint.detect_mean_shift(defined, config.penalty, config.max_changepoints)
    return [l1_std, sigma_std], corr, result, undefined


def run_compare(config: AnalysisConfig) -> ChangepointReport:
    l1 = read_norms(config.out).as_series()
    sigma = read_sigma(config.out)
    overlay, corr, result, undefined = compare_series(l1, sigma, config)

    l1_std, sigma_std = overlay
    table = pd.DataFrame({"date": _date_strings(l1_std.dates), "l1_std": l1_std.values, "sigma_std": sigma_std.values})
    write_table(table, config.out / "overlay.csv")
    write_table(corr.to_frame(), config.out / "rolling_correlation.csv")
    report = ChangepointReport(**result.as_dict(), roll_window=config.roll_window, dropped_undefined=undefined)
    write_json(report, config.out / "changepoints.json")

    plots.line_plot(overlay, _figure(config, "overlay"), config.digest, "Standardized L1 norm and filtered volatility", "z-score",
                    labels=["L1 norm", "filtered volatility"])
    plots.correlation_plot(corr.dropna(), result, _figure(config, "rolling_correlation"), config.digest, config.roll_window)
    logger.info(f"Compare: {len(result.changepoints)} changepoint(s) at {result.changepoint_dates}")
    return report


def envelope_table(env: surrogate.NullEnvelope, report: surrogate.ExceedanceReport) -> pd.DataFrame:
    _, env_idx, _ = np.intersect1d(env.dates, report.dates, assume_unique=True, return_indices=True)
    return pd.DataFrame({
        "anchor_date": _date_strings(report.dates),
        "null_mean": env.mean[env_idx],
        surrogate.quantile_label(env.q_low): env.lower[env_idx],
        surrogate.quantile_label(env.q_high): env.upper[env_idx],
        "observed": report.observed,
        "flag": report.flags,
    })


def run_nulls(config: AnalysisConfig) -> List[ExceedanceSummary]:
    """Envelope and exceedance report per configured surrogate kind."""
    observed = read_norms(config.out)
    z = standardized_returns(_prices(config))
    seed = derive_seed(config.seed, "nulls")
    summaries = []
    for kind in config.surrogate_kind:
        env = surrogate.null_envelope(
            z, kind, config.surrogates, seed,
            embedding=config.embedding,
            landscape=config.landscape,
            workers=config.workers,
            q_low=config.q_low,
            q_high=config.q_high,
        )
        report = surrogate.exceedance(observed, env)
        write_table(envelope_table(env, report), config.out / f"envelope_{kind}.csv")
        summary = ExceedanceSummary(
            kind=kind,
            n_windows=report.n_windows,
            n_below=report.n_below,
            n_above=report.n_above,
            frac_below=report.frac_below,
            frac_above=report.frac_above,
            seed=seed,
            realizations=env.count,
            q_low=env.q_low,
            q_high=env.q_high,
        )
        write_json(summary, config.out / f"exceedance_{kind}.json")
        plots.envelope_plot(env, report, _figure(config, f"null_{kind}"), config.digest)
        logger.info(f"{kind} null: {report.frac_below:.1%} below, {report.frac_above:.1%} above over {report.n_windows} windows")
        summaries.append(summary)
    return summaries


def run_regimes_and_residuals(config: AnalysisConfig) -> RegressionReport:
    """L1-by-regime table, residualization on volatility and sentiment, residual ACF."""
    sentiment = _sentiment(config)
    l1 = read_norms(config.out).as_series()
    sigma = read_sigma(config.out)

    regimes = regime_summary(l1, sentiment)
    write_table(
        pd.DataFrame([{k: getattr(r, k) for k in ("regime", "count", "median", "q1", "q3", "whisker_low", "whisker_high", "n_outliers")} for r in regimes]),
        config.out / "sentiment_regimes.csv",
    )
    plots.regime_boxplot({r.regime: r.values for r in regimes}, _figure(config, "sentiment_regimes"), config.digest)

    fit = residualize_l1(l1, sigma, sentiment, config.residual_window)
    residuals = fit.residuals
    result = acf(residuals, min(config.acf_max_lag, len(residuals) - 1))
    write_table(pd.DataFrame({"lag": result.lags, "acf": result.values}), config.out / "residual_acf.csv")
    write_table(residuals.to_frame(), config.out / "residuals.csv")
    report = RegressionReport(
        coefficients=fit.as_dict(),
        r_squared=fit.r_squared,
        window=fit.window,
        n=len(residuals),
        acf_band=result.confidence_halfwidth,
        significant_lags=[int(k) for k in result.significant()],
    )
    write_json(report, config.out / "residual_regression.json")
    plots.acf_plot(result, _figure(config, "residual_acf"), config.digest)
    return report


def run_report(config: AnalysisConfig) -> Dict[str, Any]:
    """Every stage in order, then the regime table and residual ACF."""
    results: Dict[str, Any] = {}
    for stage in ("ingest", "tda", "sv", "compare", "nulls"):
        results[stage] = STAGES[stage](config)
    results["residuals"] = run_regimes_and_residuals(config)
    return results


STAGES: Dict[str, Callable[[AnalysisConfig], Any]] = {
    "ingest": run_ingest,
    "tda": run_tda,
    "sv": run_sv,
    "compare": run_compare,
    "nulls": run_nulls,
    "report": run_report,
}


def run_stage(stage: str, config: AnalysisConfig) -> Dict[str, Any]:
    """
    Run one stage, then record the effective config and a manifest of the
    whole output directory next to its outputs.
    """
    if stage not in STAGES:
        raise PipelineError(f"unknown stage '{stage}'")
    config.out.mkdir(parents=True, exist_ok=True)
    logger.info(f"Stage '{stage}' -> {config.out} (seed={config.seed}, config digest {config.digest[:12]})")
    STAGES[stage](config)
    write_text(config.to_env_text(), config.out / EFFECTIVE_CONFIG)
    values = dict(line.split("=", 1) for line in config.to_env_text().splitlines())
    manifest = write_manifest(config.out, config.seed, config.digest, values, [stage])
    return manifest.model_dump(mode="json")


@celery_app.task(bind=True, max_retries=0)
def run_stage_task(self, stage: str, config_values: Dict[str, Any]):
    """Background entry point: rebuild the config and run one stage."""
    try:
        config = AnalysisConfig(**config_values)
        return run_stage(stage, config)
    except Exception:
        logger.exception(f"Stage '{stage}' failed in task {self.request.id}")
        raise
