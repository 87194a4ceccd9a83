# app/core/sources.py
import json
import logging
from datetime import date, datetime, timezone
from pathlib import Path

import httpx
import pandas as pd

from app.core.errors import IngestionError

logger = logging.getLogger(__name__)

YAHOO_CHART_URL = "https://query1.finance.yahoo.com/v8/finance/chart"
FEAR_GREED_URL = "https://api.alternative.me/fng/"
HEADERS = {"Accept": "application/json", "User-Agent": "topovol/1.0"}


def get_client() -> httpx.Client:
    return httpx.Client(headers=HEADERS, timeout=30.0, follow_redirects=True)


def _epoch(day: date) -> int:
    return int(datetime(day.year, day.month, day.day, tzinfo=timezone.utc).timestamp())


def fetch_prices(symbol: str, start: date, end: date, path: Path) -> Path:
    """Daily OHLC history from the Yahoo chart API, written in the bundled CSV layout."""
    with get_client() as client:
        resp = client.get(
            f"{YAHOO_CHART_URL}/{symbol}",
            params={"period1": _epoch(start), "period2": _epoch(end), "interval": "1d"},
        )
        resp.raise_for_status()
        payload = resp.json()

    try:
        result = payload["chart"]["result"][0]
        quote = result["indicators"]["quote"][0]
        adjclose = result["indicators"].get("adjclose", [{}])[0].get("adjclose", quote["close"])
        frame = pd.DataFrame({
            "Date": pd.to_datetime(result["timestamp"], unit="s", utc=True).strftime("%Y-%m-%d"),
            "Open": quote["open"],
            "High": quote["high"],
            "Low": quote["low"],
            "Close": quote["close"],
            "Adj Close": adjclose,
            "Volume": quote["volume"],
        })
    except (KeyError, IndexError, TypeError) as e:
        raise IngestionError(f"unexpected chart response for {symbol}: {e}")

    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")
    logger.info(f"Fetched {len(frame)} daily rows for {symbol} into {path}")
    return path


def fetch_fear_greed(path: Path, limit: int = 0) -> Path:
    """Full Fear & Greed history (limit=0) as the provider's JSON document."""
    with get_client() as client:
        resp = client.get(FEAR_GREED_URL, params={"limit": limit, "format": "json"})
        resp.raise_for_status()
        payload = resp.json()

    if not isinstance(payload.get("data"), list):
        raise IngestionError("Fear & Greed response has no 'data' array")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump({"data": payload["data"]}, f, indent=1)
    logger.info(f"Fetched {len(payload['data'])} Fear & Greed records into {path}")
    return path
