# app/core/config.py
import hashlib
from pathlib import Path
from typing import Annotated, Any, Dict, List, Optional

from dotenv import dotenv_values
from pydantic import Field, field_validator, model_validator
from pydantic_settings import BaseSettings, NoDecode, SettingsConfigDict

from app.analysis.embedding import EmbeddingConfig
from app.analysis.landscape import LandscapeConfig
from app.analysis.surrogate import SurrogateKind
from app.analysis.svmodel import IF2Settings

# Where and how a run executes; never part of the recorded result.
RUNTIME_KEYS = {"out", "workers"}


class AnalysisConfig(BaseSettings):
    """
    Effective configuration of one analysis run.
    Every field is a flat key so the whole thing fits in a dotenv-style file;
    keys are the CLI flag names with dashes turned into underscores.
    """

    model_config = SettingsConfigDict(env_prefix="TOPOVOL_", case_sensitive=False, extra="forbid")

    # === Inputs / outputs ===
    prices: Optional[Path] = None
    sentiment: Optional[Path] = None
    out: Path = Path("output")
    price_column: str = "Close"

    # === Randomness / scheduling ===
    seed: int = Field(20251220, ge=0, lt=2**64)
    workers: int = -1

    # === Embedding (m, d, w) ===
    m: int = Field(4, ge=1)
    d: int = Field(2, ge=1)
    window: int = Field(50, ge=2)
    stride: int = Field(1, ge=1)

    # === Landscape ===
    i_max: int = Field(10, ge=1)
    grid_size: int = Field(500, ge=2)

    # === Comparison / residualization ===
    roll_window: int = Field(180, ge=2)
    residual_window: int = Field(30, ge=2)
    acf_max_lag: int = Field(40, ge=1)
    penalty: Optional[float] = Field(None, gt=0)
    max_changepoints: Optional[int] = Field(None, ge=1)

    # === Surrogates ===
    surrogates: int = Field(30, ge=2)
    surrogate_kind: Annotated[List[SurrogateKind], NoDecode] = ["shuffle", "fft"]
    q_low: float = Field(0.05, gt=0, lt=1)
    q_high: float = Field(0.95, gt=0, lt=1)

    # === Stochastic volatility / IF2 ===
    if2_iterations: int = Field(50, ge=0)
    if2_replicates: int = Field(3, ge=1)
    if2_particles: int = Field(1000, ge=1)
    filter_particles: int = Field(2000, ge=1)
    if2_evaluations: int = Field(5, ge=1)
    if2_rw_sd: float = Field(0.02, ge=0)
    if2_cooling: float = Field(0.95, gt=0, le=1)

    @field_validator("surrogate_kind", mode="before")
    @classmethod
    def split_kinds(cls, v):
        if isinstance(v, str):
            return [k.strip() for k in v.split(",") if k.strip()]
        return v

    @field_validator("penalty", "max_changepoints", "prices", "sentiment", mode="before")
    @classmethod
    def empty_to_none(cls, v):
        return None if isinstance(v, str) and v.strip() == "" else v

    @model_validator(mode="after")
    def check_quantiles(self):
        if self.q_low >= self.q_high:
            raise ValueError("q_low must be below q_high")
        return self

    # === Derived sub-configs ===
    @property
    def embedding(self) -> EmbeddingConfig:
        return EmbeddingConfig(m=self.m, d=self.d, w=self.window, stride=self.stride)

    @property
    def landscape(self) -> LandscapeConfig:
        return LandscapeConfig(i_max=self.i_max, grid_size=self.grid_size)

    @property
    def if2(self) -> IF2Settings:
        return IF2Settings(
            iterations=self.if2_iterations,
            replicates=self.if2_replicates,
            estimation_particles=self.if2_particles,
            filter_particles=self.filter_particles,
            evaluations=self.if2_evaluations,
            rw_sd=(self.if2_rw_sd,) * 4,
            cooling=self.if2_cooling,
            seed=self.seed,
        )

    def to_env_text(self) -> str:
        """Render as sorted key=value lines; re-readable by load_config."""
        lines = []
        for key, value in sorted(self.model_dump(exclude=RUNTIME_KEYS).items()):
            if value is None:
                value = ""
            elif isinstance(value, list):
                value = ",".join(value)
            lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.to_env_text().encode("utf-8")).hexdigest()


def load_config(path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None) -> AnalysisConfig:
    """
    Build the effective config: CLI overrides beat the config file,
    which beats TOPOVOL_* environment variables and defaults.
    """
    values: Dict[str, Any] = {}
    if path is not None:
        file_values = dotenv_values(path)
        values.update({k.lower().replace("-", "_"): v for k, v in file_values.items() if v is not None})
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    return AnalysisConfig(**values)
