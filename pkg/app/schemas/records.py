# app/schemas/records.py
from datetime import date, datetime, timezone
from typing import Optional

from pydantic import BaseModel, Field, field_validator


class PriceRow(BaseModel):
    """One daily row of the price CSV after picking the configured price column."""

    Date: date
    price: float = Field(..., allow_inf_nan=False)

    model_config = {"extra": "ignore"}

    # "", "null" and the like count as missing
    @field_validator("Date", "price", mode="before")
    @classmethod
    def empty_str_to_none(cls, v):
        if isinstance(v, str) and v.strip().lower() in ("", "null", "nan", "none"):
            return None
        return v


class SentimentRecord(BaseModel):
    """One record of the Fear & Greed `data` array."""

    value: int = Field(..., ge=0, le=100)
    value_classification: Optional[str] = None
    timestamp: int

    model_config = {"extra": "allow"}

    @field_validator("value", "timestamp", mode="before")
    @classmethod
    def strip_numeric_str(cls, v):
        return v.strip() if isinstance(v, str) else v

    @property
    def day(self) -> date:
        return datetime.fromtimestamp(self.timestamp, tz=timezone.utc).date()

