# tests/test_svmodel.py
import numpy as np
import pytest
from scipy.stats import norm

from app.analysis.svmodel import (
    FilterOutput,
    IF2Settings,
    SVParams,
    filtered_volatility,
    from_estimation_scale,
    if2_estimate,
    initial_params,
    log_likelihood_at,
    log_mean_exp,
    particle_filter,
    simulate,
    to_estimation_scale,
)
from app.core.errors import DomainError, EstimationError, FilteringError
from tests.conftest import make_series

TRUE = SVParams(mu=-1.0, phi=0.97, sigma_eta=0.15, h0=-1.0)


def test_params_validation():
    with pytest.raises(DomainError):
        SVParams(mu=0.0, phi=1.0, sigma_eta=0.1, h0=0.0)
    with pytest.raises(DomainError):
        SVParams(mu=0.0, phi=0.5, sigma_eta=0.0, h0=0.0)
    with pytest.raises(DomainError):
        IF2Settings(cooling=0.0)
    with pytest.raises(DomainError):
        IF2Settings(rw_sd=(0.02, 0.02, -0.01, 0.02))


def test_estimation_scale():
    theta = to_estimation_scale(SVParams(mu=0.3, phi=0.5, sigma_eta=1.0, h0=-2.0))
    np.testing.assert_array_equal(theta, [0.3, 0.0, 0.0, -2.0])


def test_estimation_scale_round_trip(rng):
    for _ in range(1000):
        p = SVParams(
            mu=float(rng.normal(0, 5)),
            phi=float(rng.uniform(0.01, 0.99)),
            sigma_eta=float(rng.uniform(0.01, 2.0)),
            h0=float(rng.normal(0, 5)),
        )
        back = from_estimation_scale(to_estimation_scale(p))
        np.testing.assert_allclose(
            [back.mu, back.phi, back.sigma_eta, back.h0],
            [p.mu, p.phi, p.sigma_eta, p.h0],
            rtol=1e-12, atol=1e-12,
        )


def test_log_mean_exp():
    assert log_mean_exp([0.0, 0.0]) == 0.0
    assert log_mean_exp([np.log(1.0), np.log(3.0)]) == pytest.approx(np.log(2.0), abs=1e-12)
    assert log_mean_exp([-1000.0, -1000.0]) == -1000.0
    assert log_mean_exp([-np.inf, -np.inf]) == -np.inf
    with pytest.raises(DomainError):
        log_mean_exp([])


def test_simulate_collapses_without_noise():
    params = SVParams(mu=-2.0, phi=0.9, sigma_eta=1e-12, h0=-2.0)
    h, z = simulate(params, 200, seed=3)
    np.testing.assert_allclose(h.values, -2.0, atol=1e-9)
    assert len(z) == 200
    h, z = simulate(params, 0, seed=3)
    assert len(h) == 0 and len(z) == 0


def test_simulate_is_deterministic():
    _, a = simulate(TRUE, 100, seed=11)
    _, b = simulate(TRUE, 100, seed=11)
    _, c = simulate(TRUE, 100, seed=12)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_filter_matches_gaussian_likelihood_when_state_is_fixed(rng):
    z = make_series(rng.standard_normal(150))
    params = SVParams(mu=0.0, phi=0.6, sigma_eta=1e-12, h0=0.0)
    fo = particle_filter(z, params, 300, seed=5)
    assert fo.log_likelihood == pytest.approx(norm.logpdf(z.values).sum(), abs=1e-6)
    np.testing.assert_allclose(fo.filtered_h, 0.0, atol=1e-9)
    np.testing.assert_allclose(fo.ess, 300.0)


def test_filter_is_deterministic():
    _, z = simulate(TRUE, 200, seed=1)
    a = particle_filter(z, TRUE, 500, seed=9)
    b = particle_filter(z, TRUE, 500, seed=9)
    assert a.log_likelihood == b.log_likelihood
    assert np.array_equal(a.filtered_h, b.filtered_h)
    assert a.dates[0] == z.dates[0]


def test_likelihood_discriminates_shifted_mu():
    _, z = simulate(TRUE, 500, seed=2)
    shifted = SVParams(mu=TRUE.mu + 3.0, phi=TRUE.phi, sigma_eta=TRUE.sigma_eta, h0=TRUE.h0 + 3.0)
    assert particle_filter(z, TRUE, 2000, seed=4).log_likelihood > particle_filter(z, shifted, 2000, seed=4).log_likelihood


def test_filter_reports_failing_step():
    z = make_series([0.1, 0.2, 1e200, 0.1])
    with pytest.raises(FilteringError) as info:
        particle_filter(z, TRUE, 50, seed=0)
    assert info.value.step == 2


def test_filtered_volatility():
    dates = np.array(["2021-01-01", "2021-01-02"], dtype="datetime64[D]")
    fo = FilterOutput(log_likelihood=0.0, dates=dates, filtered_h=np.array([0.0, np.log(4.0)]), ess=np.ones(2), particle_count=1)
    sigma = filtered_volatility(fo)
    np.testing.assert_allclose(sigma.values, [1.0, 2.0])
    np.testing.assert_allclose(fo.filtered_variance, [1.0, 4.0])
    assert sigma.name == "sigma_hat"
    fo = particle_filter(simulate(TRUE, 50, seed=1)[1], TRUE, 100, seed=1)
    order = np.argsort(fo.filtered_h)
    assert np.all(np.diff(filtered_volatility(fo).values[order]) >= 0.0)


def test_log_likelihood_at_aggregates():
    _, z = simulate(TRUE, 80, seed=6)
    single = log_likelihood_at(z, TRUE, 200, 1, seed=3)
    several = log_likelihood_at(z, TRUE, 200, 4, seed=3)
    assert np.isfinite(single) and np.isfinite(several)
    assert several == log_likelihood_at(z, TRUE, 200, 4, seed=3)


def test_initial_params_from_variance(rng):
    z = make_series(0.5 * rng.standard_normal(400))
    init = initial_params(z)
    assert init.mu == pytest.approx(np.log(np.var(z.values, ddof=1)))
    assert init.h0 == init.mu


def test_if2_zero_iterations_returns_init():
    _, z = simulate(TRUE, 60, seed=7)
    settings = IF2Settings(iterations=0, replicates=2, estimation_particles=50, filter_particles=100, evaluations=2, seed=1)
    result = if2_estimate(z, TRUE, settings)
    assert result.params == TRUE
    assert np.isfinite(result.log_likelihood)
    assert result.trace == []


def test_if2_zero_walk_keeps_params():
    _, z = simulate(TRUE, 60, seed=7)
    settings = IF2Settings(iterations=3, replicates=1, estimation_particles=50, filter_particles=100,
                           evaluations=1, rw_sd=(0.0, 0.0, 0.0, 0.0), seed=1)
    result = if2_estimate(z, TRUE, settings)
    assert result.trace == [TRUE, TRUE, TRUE]
    assert result.params == TRUE


def test_if2_trace_stays_valid_and_workers_agree():
    _, z = simulate(TRUE, 120, seed=8)
    settings = IF2Settings(iterations=4, replicates=2, estimation_particles=100, filter_particles=200, evaluations=2, seed=5)
    serial = if2_estimate(z, initial_params(z), settings, workers=1)
    pooled = if2_estimate(z, initial_params(z), settings, workers=2)
    assert len(serial.trace) == 4
    assert all(0.0 < p.phi < 1.0 and p.sigma_eta > 0.0 for p in serial.trace)
    assert serial.params == pooled.params
    assert serial.log_likelihood == pooled.log_likelihood
    assert serial.log_likelihood == max(serial.replicate_log_likelihoods)


def test_if2_all_replicates_fail():
    z = make_series([0.1, 1e200, 0.1])
    settings = IF2Settings(iterations=1, replicates=2, estimation_particles=20, filter_particles=20, evaluations=1)
    with pytest.raises(EstimationError, match="all 2 IF2 replicates failed"):
        if2_estimate(z, TRUE, settings)


@pytest.mark.slow
def test_if2_recovers_persistence():
    _, z = simulate(TRUE, 1000, seed=20251220)
    settings = IF2Settings(iterations=50, replicates=3, estimation_particles=1000, filter_particles=2000, evaluations=5, seed=42)
    result = if2_estimate(z, initial_params(z), settings, workers=-1)
    assert 0.87 <= result.params.phi < 1.0
    assert -1.5 <= result.params.mu <= -0.5
    truth = log_likelihood_at(z, TRUE, settings.filter_particles, settings.evaluations, seed=7)
    assert result.log_likelihood >= truth - 3.0


@pytest.mark.slow
def test_likelihood_noise_shrinks_with_particles():
    _, z = simulate(TRUE, 300, seed=3)
    spread = {
        n: np.std([particle_filter(z, TRUE, n, seed).log_likelihood for seed in range(20)], ddof=1)
        for n in (250, 4000)
    }
    assert spread[4000] < spread[250]
