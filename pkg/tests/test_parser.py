# tests/test_parser.py
import json

import numpy as np
import pytest

from app.core.errors import IngestionError
from app.utils.parser import (
    ingest_prices,
    ingest_sentiment,
    load_prices,
    load_sentiment,
    read_series,
)
from app.utils.writers import write_table
from tests.conftest import make_series


def test_two_row_prices(write_prices):
    series = ingest_prices(write_prices([100.0, 110.0], start="2020-01-01"))
    assert len(series) == 2
    assert series.dates[0] == np.datetime64("2020-01-01")
    np.testing.assert_array_equal(series.values, [100.0, 110.0])


def test_shuffled_rows_are_sorted(write_prices):
    closes = [100.0, 101.0, 99.5, 102.25, 98.0, 97.0]
    ordered = ingest_prices(write_prices(closes, name="a.csv"))
    shuffled = ingest_prices(write_prices(closes, name="b.csv", shuffle=True))
    np.testing.assert_array_equal(ordered.dates, shuffled.dates)
    np.testing.assert_array_equal(ordered.values, shuffled.values)


def test_duplicate_date_is_named(tmp_path):
    path = tmp_path / "dup.csv"
    path.write_text("Date,Close\n2020-01-01,1\n2020-01-02,2\n2020-01-02,3\n", encoding="utf-8")
    with pytest.raises(IngestionError, match="duplicate date 2020-01-02"):
        ingest_prices(path)


def test_missing_column(tmp_path):
    path = tmp_path / "no_close.csv"
    path.write_text("Date,Open\n2020-01-01,1\n", encoding="utf-8")
    with pytest.raises(IngestionError, match="Close"):
        ingest_prices(path)


def test_unparsable_rows_are_dropped_and_counted(tmp_path):
    path = tmp_path / "dirty.csv"
    path.write_text(
        "Date,Close\n2020-01-01,100\n2020-01-02,null\nnot-a-date,5\n2020-01-04,\n2020-01-05,104.5\n",
        encoding="utf-8",
    )
    series, summary = load_prices(path)
    assert len(series) == 2
    assert series.dropped == 3
    assert summary.rows_read == 5
    assert summary.rows_dropped == 3
    assert summary.first_date == "2020-01-01"


def test_everything_dropped_is_an_error(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("Date,Close\n2020-01-01,\n", encoding="utf-8")
    with pytest.raises(IngestionError, match="no usable rows"):
        ingest_prices(path)


def test_adjusted_close_column(tmp_path):
    path = tmp_path / "adj.csv"
    path.write_text("Date,Close,Adj Close\n2020-01-01,10,9\n2020-01-02,11,10\n", encoding="utf-8")
    np.testing.assert_array_equal(ingest_prices(path, "Adj Close").values, [9.0, 10.0])


def test_bundled_sample(sample_dir):
    prices, summary = load_prices(sample_dir / "prices.csv")
    assert summary.rows_dropped == 0
    assert np.all(prices.values > 0)
    sentiment = ingest_sentiment(sample_dir / "fear_greed.json")
    assert np.all(np.diff(sentiment.dates.astype(int)) > 0)
    assert sentiment.classifications is not None


def test_single_sentiment_record(tmp_path):
    path = tmp_path / "fng.json"
    path.write_text(json.dumps({"data": [{"value": "26", "value_classification": "Fear", "timestamp": "1609459200"}]}))
    series = ingest_sentiment(path)
    assert series.dates[0] == np.datetime64("2021-01-01")
    assert series.values[0] == 26
    assert series.classifications == ("Fear",)


def test_sentiment_sorted_oldest_first(write_sentiment):
    series = ingest_sentiment(write_sentiment([10, 20, 30]))
    np.testing.assert_array_equal(series.values, [10, 20, 30])
    assert series.dates[0] == np.datetime64("2021-01-01")


def test_sentiment_errors(tmp_path):
    empty = tmp_path / "empty.json"
    empty.write_text(json.dumps({"data": []}))
    with pytest.raises(IngestionError, match="no observations"):
        ingest_sentiment(empty)

    out_of_range = tmp_path / "range.json"
    out_of_range.write_text(json.dumps({"data": [{"value": "250", "value_classification": "Greed", "timestamp": "1609459200"}]}))
    with pytest.raises(IngestionError, match=r"value 250 out of range \[0, 100\]"):
        ingest_sentiment(out_of_range)

    broken = tmp_path / "broken.json"
    broken.write_text('{"data": [')
    with pytest.raises(IngestionError, match="cannot read"):
        ingest_sentiment(broken)

    no_data = tmp_path / "nodata.json"
    no_data.write_text(json.dumps({"name": "Fear and Greed Index"}))
    with pytest.raises(IngestionError, match="'data' array"):
        ingest_sentiment(no_data)


def test_duplicate_sentiment_day_keeps_first(tmp_path):
    path = tmp_path / "dup.json"
    records = [
        {"value": "40", "value_classification": "Fear", "timestamp": "1609459200"},
        {"value": "60", "value_classification": "Greed", "timestamp": "1609462800"},
    ]
    path.write_text(json.dumps({"data": records}))
    series, summary = load_sentiment(path)
    assert len(series) == 1
    assert series.values[0] == 40
    assert summary.duplicates_dropped == 1


def test_written_series_round_trips(tmp_path, rng):
    s = make_series(rng.standard_normal(50) * 1e-3, name="l1_grid")
    path = tmp_path / "series.csv"
    write_table(s.to_frame(), path)
    back = read_series(path, "l1_grid")
    np.testing.assert_array_equal(back.values, s.values)
    np.testing.assert_array_equal(back.dates, s.dates)
