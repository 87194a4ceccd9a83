# app/utils/parser.py
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from app.analysis.timeseries import ReturnSeries, SentimentSeries
from app.core.errors import IngestionError
from app.schemas.records import PriceRow, SentimentRecord
from app.schemas.reports import IngestSummary

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def parse_csv(path: PathLike) -> List[Dict[str, str]]:
    """Rows as raw strings; missing cells become ""."""
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise IngestionError(f"cannot read CSV {path}: {e}")
    return df.to_dict(orient="records")


def load_prices(path: PathLike, price_column: str = "Close") -> Tuple[ReturnSeries, IngestSummary]:
    rows = parse_csv(path)
    columns = set(rows[0]) if rows else set(pd.read_csv(path, nrows=0).columns)
    missing = [c for c in ("Date", price_column) if c not in columns]
    if missing:
        raise IngestionError(f"{path}: missing required column(s) {', '.join(missing)}")

    dates, prices, dropped = [], [], 0
    for line, raw in enumerate(rows, start=2):
        try:
            row = PriceRow(Date=raw["Date"], price=raw[price_column])
        except ValidationError as e:
            logger.debug(f"{path}:{line} dropped: {e.errors()[0]['msg']}")
            dropped += 1
            continue
        dates.append(row.Date)
        prices.append(row.price)
    if dropped:
        logger.warning(f"{path}: dropped {dropped} row(s) with missing or unparsable values")
    if not dates:
        raise IngestionError(f"{path}: no usable rows after cleaning")

    frame = pd.DataFrame({"date": pd.to_datetime(dates), "price": prices}).sort_values("date", kind="stable")
    duplicated = frame["date"].duplicated()
    if duplicated.any():
        day = frame.loc[duplicated, "date"].iloc[0].strftime("%Y-%m-%d")
        raise IngestionError(f"{path}: duplicate date {day}")

    series = ReturnSeries(frame["date"].to_numpy(), frame["price"].to_numpy(), name="price", dropped=dropped)
    summary = IngestSummary(
        source="prices",
        rows_read=len(rows),
        rows_dropped=dropped,
        observations=len(series),
        first_date=str(series.dates[0]),
        last_date=str(series.dates[-1]),
    )
    return series, summary


def ingest_prices(path: PathLike, price_column: str = "Close") -> ReturnSeries:
    return load_prices(path, price_column)[0]


def _sentiment_error(index: int, raw: Dict[str, Any], e: ValidationError) -> IngestionError:
    err = e.errors()[0]
    if err["loc"] == ("value",) and err["type"] in ("greater_than_equal", "less_than_equal"):
        return IngestionError(f"sentiment record {index}: value {raw.get('value')} out of range [0, 100]")
    return IngestionError(f"sentiment record {index}: {'.'.join(map(str, err['loc']))}: {err['msg']}")


def load_sentiment(path: PathLike) -> Tuple[SentimentSeries, IngestSummary]:
    try:
        with open(path, encoding="utf-8") as fh:
            document = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise IngestionError(f"cannot read sentiment JSON {path}: {e}")
    data = document.get("data") if isinstance(document, dict) else None
    if not isinstance(data, list):
        raise IngestionError(f"{path}: expected a top-level 'data' array")
    if not data:
        raise IngestionError(f"{path}: no observations")

    records = []
    for index, raw in enumerate(data):
        if not isinstance(raw, dict):
            raise IngestionError(f"sentiment record {index}: expected an object")
        try:
            records.append(SentimentRecord(**raw))
        except ValidationError as e:
            raise _sentiment_error(index, raw, e)

    # provider lists newest first; stable sort keeps the first occurrence of a day first
    order = sorted(range(len(records)), key=lambda i: records[i].day)
    seen, kept = set(), []
    for i in order:
        if records[i].day in seen:
            continue
        seen.add(records[i].day)
        kept.append(records[i])
    duplicates = len(records) - len(kept)
    if duplicates:
        logger.warning(f"{path}: {duplicates} duplicate day(s) dropped, first occurrence kept")

    classifications = [r.value_classification or "" for r in kept]
    series = SentimentSeries(
        dates=np.array([r.day for r in kept], dtype="datetime64[D]"),
        values=np.array([r.value for r in kept]),
        classifications=tuple(classifications) if all(classifications) else None,
    )
    summary = IngestSummary(
        source="sentiment",
        rows_read=len(data),
        rows_dropped=0,
        duplicates_dropped=duplicates,
        observations=len(series),
        first_date=str(series.dates[0]),
        last_date=str(series.dates[-1]),
    )
    return series, summary


def ingest_sentiment(path: PathLike) -> SentimentSeries:
    return load_sentiment(path)[0]


def read_series(path: PathLike, column: str, date_column: str = "date") -> ReturnSeries:
    """Re-read a table written by the pipeline; floats round-trip exactly."""
    try:
        df = pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise IngestionError(f"cannot read {path}: {e}")
    if column not in df.columns or date_column not in df.columns:
        raise IngestionError(f"{path}: expected columns {date_column}, {column}")
    return ReturnSeries.from_frame(df, column, date_column)
