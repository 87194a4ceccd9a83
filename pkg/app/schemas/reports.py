# app/schemas/reports.py

from pydantic import BaseModel
from typing import List, Optional, Literal, Dict


class IngestSummary(BaseModel):
    source: Literal["prices", "sentiment"]
    rows_read: int
    rows_dropped: int
    duplicates_dropped: int = 0
    observations: int
    first_date: Optional[str] = None
    last_date: Optional[str] = None


class ExceedanceSummary(BaseModel):
    kind: Literal["shuffle", "fft"]
    n_windows: int
    n_below: int
    n_above: int
    frac_below: float
    frac_above: float
    seed: int
    realizations: int
    q_low: float = 0.05
    q_high: float = 0.95


class SVSummary(BaseModel):
    params: Dict[str, float]
    log_likelihood: float
    filter_log_likelihood: float
    replicate_log_likelihoods: List[Optional[float]]
    best_replicate: int
    failures: List[str] = []
    iterations: int
    estimation_particles: int
    filter_particles: int
    seed: int


class ChangepointReport(BaseModel):
    method: Literal["pelt", "binary_segmentation", "constant"]
    changepoints: List[int]
    changepoint_dates: List[str]
    segment_means: List[float]
    penalty: float
    cost: float
    n: int
    roll_window: int
    dropped_undefined: int = 0


class RegressionReport(BaseModel):
    coefficients: Dict[str, float]
    r_squared: float
    window: int
    n: int
    acf_band: float
    significant_lags: List[int]


class ArtifactEntry(BaseModel):
    path: str
    sha256: str
    bytes: int


class RunManifest(BaseModel):
    seed: int
    config_digest: str
    config: Dict[str, str]
    stages: List[str]
    files: List[ArtifactEntry] = []
