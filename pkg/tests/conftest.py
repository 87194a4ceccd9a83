# tests/conftest.py
import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from app.analysis.timeseries import ReturnSeries
from app.core.config import AnalysisConfig

SAMPLE_DIR = Path(__file__).resolve().parents[1] / "data" / "sample"


def make_series(values, start="2021-01-01", name="value") -> ReturnSeries:
    values = np.asarray(values, dtype=float)
    dates = np.datetime64(start, "D") + np.arange(len(values))
    return ReturnSeries(dates, values, name=name)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def sample_dir() -> Path:
    return SAMPLE_DIR


@pytest.fixture
def write_prices(tmp_path):
    """Write a price CSV in the provider layout from a list of closes."""

    def _write(closes, start="2021-01-01", name="prices.csv", shuffle=False):
        dates = pd.date_range(start, periods=len(closes), freq="D").strftime("%Y-%m-%d")
        frame = pd.DataFrame({
            "Date": dates,
            "Open": closes,
            "High": closes,
            "Low": closes,
            "Close": closes,
            "Adj Close": closes,
            "Volume": 1000,
        })
        if shuffle:
            frame = frame.sample(frac=1.0, random_state=7)
        path = tmp_path / name
        frame.to_csv(path, index=False)
        return path

    return _write


@pytest.fixture
def write_sentiment(tmp_path):
    """Write a Fear & Greed JSON document; values are given oldest first."""

    def _write(values, start="2021-01-01", name="fng.json", labels=None):
        base = int(pd.Timestamp(start, tz="UTC").timestamp())
        records = [
            {
                "value": str(int(v)),
                "value_classification": labels[i] if labels else "Neutral",
                "timestamp": str(base + i * 86400),
            }
            for i, v in enumerate(values)
        ]
        path = tmp_path / name
        path.write_text(json.dumps({"data": records[::-1]}), encoding="utf-8")
        return path

    return _write


@pytest.fixture
def random_walk_prices(rng):
    def _closes(n, vol=0.03):
        return list(np.round(100.0 * np.exp(np.cumsum(vol * rng.standard_normal(n))), 6))

    return _closes


@pytest.fixture
def fast_config(tmp_path, sample_dir):
    """Full pipeline on the bundled sample at desk-check scale."""

    def _config(**overrides):
        values = dict(
            prices=sample_dir / "prices.csv",
            sentiment=sample_dir / "fear_greed.json",
            out=tmp_path / "out",
            workers=1,
            window=20,
            grid_size=200,
            surrogates=4,
            roll_window=60,
            if2_iterations=2,
            if2_replicates=2,
            if2_particles=100,
            filter_particles=200,
            if2_evaluations=2,
        )
        values.update(overrides)
        return AnalysisConfig(**values)

    return _config
