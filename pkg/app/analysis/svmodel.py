# app/analysis/svmodel.py
"""
Discrete-time stochastic volatility model

    h_t = mu + phi (h_{t-1} - mu) + sigma_eta eta_t,   eta_t ~ N(0, 1)
    z_t | h_t ~ N(0, exp(h_t))

with a bootstrap particle filter (systematic resampling every step) and
IF2 iterated filtering for maximum likelihood. Estimation happens on an
unconstrained scale: logit(phi), log(sigma_eta), mu and h0 unchanged.
"""

import logging
from dataclasses import dataclass, field
from functools import partial
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit, logit

from app.analysis.timeseries import ReturnSeries
from app.core.errors import DomainError, EstimationError, FilteringError
from app.core.parallel import run_parallel
from app.core.rng import derive_seed, generator

logger = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))
PARAM_NAMES = ("mu", "phi", "sigma_eta", "h0")


@dataclass(frozen=True)
class SVParams:
    mu: float
    phi: float
    sigma_eta: float
    h0: float

    def __post_init__(self):
        if not 0.0 < self.phi < 1.0:
            raise DomainError(f"phi must lie in (0, 1), got {self.phi}")
        if not self.sigma_eta > 0.0:
            raise DomainError(f"sigma_eta must be positive, got {self.sigma_eta}")

    def as_dict(self):
        return {name: float(getattr(self, name)) for name in PARAM_NAMES}


@dataclass(frozen=True)
class IF2Settings:
    iterations: int = 50
    replicates: int = 3
    estimation_particles: int = 1000
    filter_particles: int = 2000
    evaluations: int = 5
    rw_sd: Tuple[float, float, float, float] = (0.02, 0.02, 0.02, 0.02)
    cooling: float = 0.95
    seed: int = 0

    def __post_init__(self):
        counts = (self.replicates, self.estimation_particles, self.filter_particles, self.evaluations)
        if self.iterations < 0 or min(counts) < 1:
            raise DomainError("IF2 counts must be ≥ 1 (iterations ≥ 0)")
        if not 0.0 < self.cooling <= 1.0:
            raise DomainError(f"cooling factor must lie in (0, 1], got {self.cooling}")
        if len(self.rw_sd) != 4 or min(self.rw_sd) < 0:
            raise DomainError("rw_sd needs four non-negative entries (mu, phi, sigma_eta, h0)")


@dataclass(frozen=True, eq=False)
class FilterOutput:
    log_likelihood: float
    dates: np.ndarray
    filtered_h: np.ndarray
    ess: np.ndarray
    particle_count: int

    @property
    def filtered_variance(self) -> np.ndarray:
        return np.exp(self.filtered_h)

    @property
    def filtered_sigma(self) -> np.ndarray:
        return np.exp(self.filtered_h / 2.0)


@dataclass(frozen=True, eq=False)
class IF2Result:
    params: SVParams
    log_likelihood: float
    replicate_params: List[Optional[SVParams]] = field(default_factory=list)
    replicate_log_likelihoods: List[Optional[float]] = field(default_factory=list)
    failures: List[str] = field(default_factory=list)
    best_replicate: int = 0
    trace: List[SVParams] = field(default_factory=list)


# === Parameter scales ===

def to_estimation_scale(params: SVParams) -> np.ndarray:
    return np.array([params.mu, logit(params.phi), np.log(params.sigma_eta), params.h0])


def from_estimation_scale(theta: Sequence[float]) -> SVParams:
    mu, phi_logit, log_sigma, h0 = (float(v) for v in theta)
    return SVParams(mu=mu, phi=float(expit(phi_logit)), sigma_eta=float(np.exp(log_sigma)), h0=h0)


def initial_params(z: ReturnSeries) -> SVParams:
    """mu from the log of the empirical variance; high persistence otherwise."""
    mu = float(np.log(np.var(z.values, ddof=1)))
    return SVParams(mu=mu, phi=0.95, sigma_eta=0.2, h0=mu)


def log_mean_exp(values: Sequence[float]) -> float:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise DomainError("log_mean_exp of an empty list")
    m = v.max()
    if not np.isfinite(m):
        return float(m)
    return float(m + np.log(np.mean(np.exp(v - m))))


# === Simulation ===

def simulate(params: SVParams, n: int, seed: int, start=None) -> Tuple[ReturnSeries, ReturnSeries]:
    if n < 0:
        raise DomainError(f"n must be non-negative, got {n}")
    rng = generator(seed)
    eta = rng.standard_normal(n)
    eps = rng.standard_normal(n)
    h = np.empty(n)
    prev = params.h0
    for t in range(n):
        prev = params.mu + params.phi * (prev - params.mu) + params.sigma_eta * eta[t]
        h[t] = prev
    z = np.exp(h / 2.0) * eps
    dates = np.datetime64(start or "2020-01-01", "D") + np.arange(n)
    return ReturnSeries(dates, h, name="h"), ReturnSeries(dates, z, name="z")


# === Filtering ===

def _log_obs_density(z_t: float, h: np.ndarray) -> np.ndarray:
    return -0.5 * (LOG_2PI + h + z_t * z_t * np.exp(-h))


def _systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = len(weights)
    positions = (rng.random() + np.arange(n)) / n
    cumulative = np.cumsum(weights)
    cumulative[-1] = 1.0
    return np.minimum(np.searchsorted(cumulative, positions, side="right"), n - 1)


def _weigh(z_t: float, h: np.ndarray, step: int) -> Tuple[float, np.ndarray]:
    """Log of the mean weight and the normalized weights."""
    logw = _log_obs_density(z_t, h)
    m = logw.max()
    if not np.isfinite(m):
        raise FilteringError(f"all particle weights vanished at step {step}", step=step)
    w = np.exp(logw - m)
    total = w.sum()
    return float(m + np.log(total / len(w))), w / total


def particle_filter(z: ReturnSeries, params: SVParams, n_particles: int, seed: int) -> FilterOutput:
    """
    Bootstrap filter: propagate with the state equation, weight by
    N(z_t; 0, exp(h)), resample systematically. h_hat is the mean of the
    resampled particles.
    """
    if len(z) == 0:
        raise DomainError("particle filter needs at least one observation")
    if n_particles < 1:
        raise DomainError("particle count must be ≥ 1")
    rng = generator(seed)
    y = z.values
    h = np.full(n_particles, params.h0, dtype=float)
    h_hat = np.empty(len(y))
    ess = np.empty(len(y))
    loglik = 0.0
    for t, z_t in enumerate(y):
        h = params.mu + params.phi * (h - params.mu) + params.sigma_eta * rng.standard_normal(n_particles)
        step_ll, w = _weigh(z_t, h, t)
        loglik += step_ll
        ess[t] = 1.0 / np.sum(w * w)
        h = h[_systematic_resample(w, rng)]
        h_hat[t] = h.mean()
    return FilterOutput(log_likelihood=loglik, dates=z.dates, filtered_h=h_hat, ess=ess, particle_count=n_particles)


def log_likelihood_at(z: ReturnSeries, params: SVParams, n_particles: int, evaluations: int, seed: int) -> float:
    """log-mean-exp of `evaluations` independent filter likelihoods at one point."""
    if evaluations < 1:
        raise DomainError("need at least one likelihood evaluation")
    return log_mean_exp([
        particle_filter(z, params, n_particles, derive_seed(seed, "evaluate", k)).log_likelihood
        for k in range(evaluations)
    ])


def filtered_volatility(fo: FilterOutput) -> ReturnSeries:
    return ReturnSeries(fo.dates, fo.filtered_sigma, name="sigma_hat")


# === IF2 ===

def _if2_pass(y: np.ndarray, swarm: np.ndarray, sd: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """
    One perturbed filtering pass. mu, phi and sigma_eta take a random-walk
    step at every observation; h0 is perturbed once, at the start.
    """
    n = len(swarm)
    swarm = swarm.copy()
    swarm[:, 3] += sd[3] * rng.standard_normal(n)
    h = swarm[:, 3].copy()
    for t, z_t in enumerate(y):
        swarm[:, :3] += sd[:3] * rng.standard_normal((n, 3))
        mu, phi, sigma = swarm[:, 0], expit(swarm[:, 1]), np.exp(swarm[:, 2])
        h = mu + phi * (h - mu) + sigma * rng.standard_normal(n)
        _, w = _weigh(z_t, h, t)
        idx = _systematic_resample(w, rng)
        swarm, h = swarm[idx], h[idx]
    return swarm


def _point_estimate(swarm: np.ndarray) -> np.ndarray:
    theta = swarm.mean(axis=0)
    same = np.ptp(swarm, axis=0) == 0
    theta[same] = swarm[0, same]
    return theta


def _if2_replicate(replicate: int, z: ReturnSeries, init: SVParams, settings: IF2Settings):
    seed = derive_seed(settings.seed, "if2", replicate)
    rng = generator(seed)
    theta0 = to_estimation_scale(init)
    trace: List[SVParams] = []
    try:
        params = init
        swarm = np.tile(theta0, (settings.estimation_particles, 1))
        for iteration in range(settings.iterations):
            sd = np.asarray(settings.rw_sd) * settings.cooling ** iteration
            swarm = _if2_pass(z.values, swarm, sd, rng)
            theta = _point_estimate(swarm)
            # an unperturbed swarm leaves the starting point untouched
            params = init if np.array_equal(theta, theta0) else from_estimation_scale(theta)
            trace.append(params)
        score = log_likelihood_at(z, params, settings.filter_particles, settings.evaluations, seed)
        return params, score, trace, None
    except (FilteringError, DomainError) as e:
        return None, None, trace, f"replicate {replicate}: {e}"


def if2_estimate(z: ReturnSeries, init: SVParams, settings: IF2Settings, workers: int = 1) -> IF2Result:
    """
    Replicated IF2 from one starting point. Each replicate's final point is
    scored by log-mean-exp over independent particle filters; the best
    score wins.
    """
    if len(z) == 0:
        raise DomainError("IF2 needs at least one observation")
    job = partial(_if2_replicate, z=z, init=init, settings=settings)
    outcomes = run_parallel(job, range(settings.replicates), workers)

    params = [o[0] for o in outcomes]
    scores = [o[1] for o in outcomes]
    failures = [o[3] for o in outcomes if o[3] is not None]
    for message in failures:
        logger.warning(f"IF2 {message}")
    valid = [r for r, s in enumerate(scores) if s is not None]
    if not valid:
        raise EstimationError(f"all {settings.replicates} IF2 replicates failed")
    best = max(valid, key=lambda r: scores[r])
    logger.info(f"IF2 best replicate {best}: loglik={scores[best]:.3f} params={params[best].as_dict()}")
    return IF2Result(
        params=params[best],
        log_likelihood=scores[best],
        replicate_params=params,
        replicate_log_likelihoods=scores,
        failures=failures,
        best_replicate=best,
        trace=outcomes[best][2],
    )
