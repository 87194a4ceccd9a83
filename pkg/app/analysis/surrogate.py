# app/analysis/surrogate.py
"""
Null models for the landscape-norm series: shuffle and FFT phase-randomized
surrogates, pointwise quantile envelopes and exceedance counts.
"""

import logging
from dataclasses import dataclass
from functools import partial
from typing import Literal, Optional, Sequence, Tuple

import numpy as np

from app.analysis.embedding import EmbeddingConfig
from app.analysis.landscape import LandscapeConfig, LandscapeNormSeries, norm_series
from app.analysis.timeseries import ReturnSeries
from app.core.errors import AnalysisError, ConsistencyError, DomainError, InsufficientDataError
from app.core.parallel import run_parallel
from app.core.rng import derive_seed, generator

logger = logging.getLogger(__name__)

SurrogateKind = Literal["shuffle", "fft"]
IMAG_TOLERANCE = 1e-9


def quantile_label(level: float) -> str:
    """0.05 -> 'q05', 0.9 -> 'q90'."""
    return f"q{int(round(level * 100)):02d}"


@dataclass(frozen=True, eq=False)
class NullEnvelope:
    dates: np.ndarray
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    kind: str
    count: int
    q_low: float = 0.05
    q_high: float = 0.95
    seed: Optional[int] = None
    samples: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.dates)


@dataclass(frozen=True, eq=False)
class ExceedanceReport:
    kind: str
    n_windows: int
    n_below: int
    n_above: int
    dates: np.ndarray
    observed: np.ndarray
    flags: np.ndarray

    @property
    def frac_below(self) -> float:
        return self.n_below / self.n_windows

    @property
    def frac_above(self) -> float:
        return self.n_above / self.n_windows


# === Surrogates ===

def shuffle_surrogate(z: ReturnSeries, seed: int, permutation: Optional[Sequence[int]] = None) -> ReturnSeries:
    """Values permuted uniformly at random, dates unchanged. `permutation` overrides the draw."""
    if len(z) == 0:
        raise InsufficientDataError("shuffle surrogate needs a nonempty series")
    if permutation is None:
        perm = generator(seed).permutation(len(z))
    else:
        perm = np.asarray(permutation, dtype=np.int64)
        if perm.shape != (len(z),) or not np.array_equal(np.sort(perm), np.arange(len(z))):
            raise DomainError("permutation must be a bijection of 0..N-1")
    return z.with_values(z.values[perm])


def fft_surrogate(z: ReturnSeries, seed: int) -> ReturnSeries:
    """
    Phase randomization with conjugate symmetry. Z_0 and, for even N, the
    Nyquist coefficient are kept; amplitudes at every frequency are kept.
    """
    n = len(z)
    if n < 2:
        raise InsufficientDataError(f"FFT surrogate needs at least 2 observations, got {n}")
    if np.isnan(z.values).any():
        raise DomainError("FFT surrogate needs a series without missing values")
    if np.ptp(z.values) == 0:
        return z.with_values(z.values.copy())

    mean = z.values.mean()
    spectrum = np.fft.fft(z.values - mean)
    half = (n - 1) // 2
    k = np.arange(1, half + 1)
    phases = generator(seed).uniform(0.0, 2.0 * np.pi, size=half)
    randomized = spectrum.copy()
    randomized[k] = np.abs(spectrum[k]) * np.exp(1j * phases)
    randomized[n - k] = np.conj(randomized[k])

    out = np.fft.ifft(randomized)
    residue = float(np.max(np.abs(out.imag)))
    if residue > IMAG_TOLERANCE:
        raise ConsistencyError(f"inverse FFT left an imaginary residue of {residue:.3e}")
    return z.with_values(out.real + mean)


def make_surrogate(z: ReturnSeries, kind: SurrogateKind, seed: int) -> ReturnSeries:
    if kind == "shuffle":
        return shuffle_surrogate(z, seed)
    if kind == "fft":
        return fft_surrogate(z, seed)
    raise DomainError(f"unknown surrogate kind '{kind}'")


# === Envelopes ===

def envelope_from_samples(
    samples: np.ndarray,
    dates: np.ndarray,
    kind: str,
    q_low: float = 0.05,
    q_high: float = 0.95,
    seed: Optional[int] = None,
    keep_samples: bool = False,
) -> NullEnvelope:
    """
    samples[j, t] is realization j at window t. Quantiles interpolate
    linearly between order statistics, h = (n - 1) p + 1.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[0] < 2:
        raise InsufficientDataError("an envelope needs at least 2 realizations")
    if samples.shape[1] != len(dates):
        raise DomainError(f"{samples.shape[1]} windows in samples but {len(dates)} dates")
    if not 0.0 <= q_low < q_high <= 1.0:
        raise DomainError(f"quantile levels must satisfy 0 ≤ q_low < q_high ≤ 1, got {q_low}, {q_high}")
    lower, upper = np.quantile(samples, [q_low, q_high], axis=0, method="linear")
    mean = samples.mean(axis=0)
    flat = np.ptp(samples, axis=0) == 0
    mean[flat] = samples[0, flat]
    return NullEnvelope(
        dates=np.asarray(dates),
        mean=mean,
        lower=lower,
        upper=upper,
        kind=kind,
        count=samples.shape[0],
        q_low=q_low,
        q_high=q_high,
        seed=seed,
        samples=samples if keep_samples else None,
    )


def _realization(j: int, z: ReturnSeries, kind: SurrogateKind, seed: int, embedding: EmbeddingConfig, landscape: LandscapeConfig) -> Tuple[int, Optional[LandscapeNormSeries], Optional[str]]:
    try:
        surrogate = make_surrogate(z, kind, derive_seed(seed, kind, j))
        return j, norm_series(surrogate, embedding, landscape, workers=1), None
    except AnalysisError as e:
        return j, None, str(e)


def null_envelope(
    z: ReturnSeries,
    kind: SurrogateKind,
    count: int,
    seed: int,
    embedding: EmbeddingConfig = EmbeddingConfig(),
    landscape: LandscapeConfig = LandscapeConfig(),
    workers: int = 1,
    q_low: float = 0.05,
    q_high: float = 0.95,
    keep_samples: bool = False,
) -> NullEnvelope:
    """
    Run the full embedding -> persistence -> landscape pipeline on `count`
    surrogates of `z` and summarize each window's sample. Realization j is
    seeded with derive_seed(seed, kind, j), so any one of them can be replayed.
    """
    if count < 2:
        raise DomainError(f"null envelope needs count ≥ 2, got {count}")
    if embedding.window_count(len(z)) < 1:
        raise InsufficientDataError(f"series of length {len(z)} yields no windows for {embedding}")
    job = partial(_realization, z=z, kind=kind, seed=seed, embedding=embedding, landscape=landscape)
    outcomes = run_parallel(job, range(count), workers)

    survivors = []
    for j, norms, error in outcomes:
        if norms is None:
            logger.warning(f"{kind} realization {j} failed and was dropped: {error}")
        else:
            survivors.append(norms)
    if len(survivors) < 2:
        raise InsufficientDataError(f"only {len(survivors)} of {count} {kind} realizations survived")

    logger.info(f"{kind} envelope: {len(survivors)} realizations over {len(survivors[0])} windows")
    samples = np.vstack([s.values for s in survivors])
    return envelope_from_samples(samples, survivors[0].dates, kind, q_low, q_high, seed=seed, keep_samples=keep_samples)


# === Exceedance ===

def exceedance(observed: LandscapeNormSeries, env: NullEnvelope) -> ExceedanceReport:
    """below: value < lower quantile; above: value > upper quantile; over the inner join on anchor dates."""
    common, obs_idx, env_idx = np.intersect1d(observed.dates, env.dates, assume_unique=True, return_indices=True)
    values = observed.values[obs_idx]
    lower, upper = env.lower[env_idx], env.upper[env_idx]
    valid = np.isfinite(values) & np.isfinite(lower) & np.isfinite(upper)
    if not valid.any():
        raise InsufficientDataError("observed norms and envelope share no valid windows")
    if not valid.all():
        logger.warning(f"{int((~valid).sum())} windows without a defined norm or envelope were skipped")

    common, values, lower, upper = common[valid], values[valid], lower[valid], upper[valid]
    below = values < lower
    above = values > upper
    flags = np.where(below, "below", np.where(above, "above", "inside"))
    return ExceedanceReport(
        kind=env.kind,
        n_windows=len(common),
        n_below=int(below.sum()),
        n_above=int(above.sum()),
        dates=common,
        observed=values,
        flags=flags,
    )
