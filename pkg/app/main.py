# app/main.py
import logging
from datetime import date
from pathlib import Path

import click
import httpx
from pydantic import ValidationError

from app.core.config import AnalysisConfig, load_config
from app.core.errors import AnalysisError

logger = logging.getLogger(__name__)

OPTIONS = [
    click.option("--prices", type=click.Path(path_type=Path), help="Daily price CSV (Date, Close, ...)."),
    click.option("--sentiment", type=click.Path(path_type=Path), help="Fear & Greed JSON document."),
    click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), help="Flat key=value config file."),
    click.option("--seed", type=int, help="Top-level 64-bit seed."),
    click.option("--out", type=click.Path(file_okay=False, path_type=Path), help="Output directory."),
    click.option("--m", type=int, help="Embedding dimension."),
    click.option("--d", type=int, help="Embedding delay."),
    click.option("--window", type=int, help="Points per sliding window."),
    click.option("--roll-window", type=int, help="Rolling-correlation window (days)."),
    click.option("--surrogates", type=int, help="Realizations per null model."),
    click.option("--surrogate-kind", help="Comma-separated: shuffle,fft."),
    click.option("--penalty", type=float, help="PELT penalty (default 2 var log n)."),
    click.option("--max-changepoints", type=int, help="Number of changepoints to report (1 = single dominant shift)."),
    click.option("--price-column", help="Price column, e.g. Close or 'Adj Close'."),
    click.option("--workers", type=int, help="Worker processes (-1 = all cores)."),
    click.option("--enqueue", is_flag=True, help="Submit to the Celery broker instead of running here."),
]


def analysis_options(f):
    for option in reversed(OPTIONS):
        f = option(f)
    return f


def build_config(config_path, **overrides) -> AnalysisConfig:
    try:
        return load_config(config_path, overrides)
    except ValidationError as e:
        raise click.UsageError(f"invalid configuration:\n{e}")


def execute(stage: str, config: AnalysisConfig, enqueue: bool = False):
    from app.tasks.analysis_tasks import run_stage, run_stage_task

    if enqueue:
        result = run_stage_task.delay(stage, config.model_dump(mode="json"))
        click.echo(f"Submitted '{stage}' as task {result.id}")
        return
    try:
        manifest = run_stage(stage, config)
    except AnalysisError as e:
        logger.debug("Stage failed", exc_info=True)
        raise click.ClickException(str(e))
    click.echo(f"{stage}: {len(manifest['files'])} files in {config.out} (config digest {manifest['config_digest'][:12]})")


@click.group()
@click.option("--log-level", default="INFO", show_default=True,
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
def cli(log_level):
    """Topological and stochastic-volatility analysis of daily return series."""
    logging.basicConfig(
        level=log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def _stage_command(stage: str, help_text: str):
    @analysis_options
    def command(config_path, enqueue, **overrides):
        execute(stage, build_config(config_path, **overrides), enqueue)

    command.__doc__ = help_text
    return cli.command(name=stage)(command)


_stage_command("tda", "Sliding-window persistent homology and L1 landscape norms.")
_stage_command("sv", "IF2 estimation and filtered stochastic volatility.")
_stage_command("compare", "Overlay, rolling correlation and PELT changepoints.")
_stage_command("nulls", "Shuffle / FFT null envelopes and exceedance reports.")
_stage_command("report", "Full run: every stage plus regimes, residual ACF and manifest.")


@cli.command()
@analysis_options
@click.option("--fetch", is_flag=True, help="Download prices and sentiment before ingesting.")
@click.option("--symbol", default="BTC-USD", show_default=True)
@click.option("--start", type=click.DateTime(formats=["%Y-%m-%d"]), default="2020-01-01", show_default=True)
@click.option("--end", type=click.DateTime(formats=["%Y-%m-%d"]), default=None)
def ingest(config_path, enqueue, fetch, symbol, start, end, **overrides):
    """Parse and clean the input files; optionally fetch them first."""
    config = build_config(config_path, **overrides)
    if fetch:
        from app.core.sources import fetch_fear_greed, fetch_prices

        prices = config.prices or config.out / "raw" / f"{symbol}.csv"
        sentiment = config.sentiment or config.out / "raw" / "fear_greed.json"
        try:
            fetch_prices(symbol, start.date(), (end.date() if end else date.today()), prices)
            fetch_fear_greed(sentiment)
        except (httpx.HTTPError, AnalysisError) as e:
            raise click.ClickException(f"fetch failed: {e}")
        config = build_config(config_path, **{**overrides, "prices": prices, "sentiment": sentiment})
    execute("ingest", config, enqueue)


if __name__ == "__main__":
    cli()
