"""Tests for oracle.py module."""

from __future__ import annotations

import logging
import math

import numpy as np
import pytest
from scipy import integrate, stats

from anakit import autodiff as ad, models, oracle


KAPPA, TAU, SIGMA, DT = 0.5, 0.06, 0.08, 0.01
CIR_PARAMS = models.CirParams(KAPPA, TAU, SIGMA, DT)


def _noiseless(xs: np.ndarray, kappa: float, tau: float, dt: float) -> oracle.PairSample:
    return oracle.PairSample(xs, xs + kappa * (tau - xs) * dt, dt)


def test_pair_sample_validation() -> None:
    """Unit tests for method."""
    s = oracle.PairSample.from_path(np.array([0.05, 0.06, 0.07]), DT)
    assert len(s) == 2
    np.testing.assert_array_equal(s.ys, [0.06, 0.07])
    assert len(oracle.PairSample(np.empty(0), np.empty(0), DT)) == 0

    with pytest.raises(ad.ShapeError):
        oracle.PairSample(np.ones(3), np.ones(2), DT)
    with pytest.raises(ad.DomainError):
        oracle.PairSample(np.array([0.1, 0.0]), np.ones(2), DT)


def test_tau_mle_examples() -> None:
    """Unit tests for method."""
    s = oracle.PairSample(np.array([1.0, 2.0]), np.array([1.0, 2.0]), dt=1.0)
    assert oracle.tau_mle(s, kappa=0.1) == pytest.approx(4.0 / 3.0, rel=1e-14)

    xs = np.random.default_rng(0).uniform(0.01, 0.1, 100)
    estimate = oracle.tau_mle(_noiseless(xs, KAPPA, TAU, DT), KAPPA, SIGMA)
    assert estimate == pytest.approx(TAU, rel=1e-10)

    with pytest.raises(ad.ContractError):
        oracle.tau_mle(s, kappa=0.0)
    with pytest.raises(ad.ContractError):
        oracle.tau_mle(oracle.PairSample(np.empty(0), np.empty(0), DT), KAPPA)


def test_kappa_mle_examples() -> None:
    """Unit tests for method."""
    xs = np.random.default_rng(1).uniform(0.01, 0.1, 100)
    assert oracle.kappa_mle(_noiseless(xs, KAPPA, TAU, DT), TAU) == pytest.approx(KAPPA, rel=1e-8)


def test_kappa_mle_degenerates_at_stationary_moments() -> None:
    """Inputs with X_-1 = 1/tau and X_0 = tau leave the kappa likelihood flat."""
    s = _noiseless(np.full(10, TAU), KAPPA, TAU, DT)
    with pytest.raises(oracle.DegeneracyError):
        oracle.kappa_mle(s, TAU)


def test_kappa_mle_conditioning_warning(caplog: pytest.LogCaptureFixture) -> None:
    """Unit tests for method."""
    # tau (tau X_-1 - 1) + X_0 - tau is of order 1e-9 for inputs this close to tau
    xs = TAU + np.array([-1e-5, 1e-5])
    with caplog.at_level(logging.WARNING):
        oracle.kappa_mle(_noiseless(xs, KAPPA, TAU, DT), TAU)
    assert "ill-conditioned" in caplog.text


def test_fisher_information() -> None:
    """Unit tests for method."""
    assert oracle.fisher_tau(1.0, 1.0, 1.0, 1.0) == 1.0
    assert oracle.fisher_tau(KAPPA, SIGMA, DT, 1.0 / TAU) == pytest.approx(6.5104, abs=1e-4)
    assert oracle.fisher_kappa(1.0, 1.0, 1.0, 2.0, 1.0) == 1.0
    assert oracle.fisher_kappa(TAU, SIGMA, DT, 1.0 / TAU, TAU) == pytest.approx(0.0, abs=1e-15)

    moments = oracle.uniform_moments(0.001, 0.03)
    assert moments.x_0 == pytest.approx(0.0155)
    assert moments.x_minus1 == pytest.approx(math.log(30.0) / 0.029)
    expected = DT * (TAU**2 * moments.x_minus1 - 2.0 * TAU + moments.x_0) / SIGMA**2
    information = oracle.fisher_kappa(TAU, SIGMA, DT, moments.x_minus1, moments.x_0)
    assert information == pytest.approx(expected)
    assert information > 0

    assert oracle.tau_asymptotic_std(KAPPA, SIGMA, DT, 1.0 / TAU, 4000) == pytest.approx(
        math.sqrt(SIGMA**2 * TAU / (KAPPA**2 * DT * 4000))
    )
    assert oracle.kappa_asymptotic_std(TAU, SIGMA, DT, 1.0 / TAU, TAU, 4000) == math.inf


def test_moments() -> None:
    """Unit tests for method."""
    s = oracle.PairSample(np.array([0.5, 2.0]), np.ones(2), DT)
    assert oracle.moment_stats(s) == oracle.MomentStats(1.25, 1.25)

    stationary = oracle.stationary_moments(KAPPA, TAU, SIGMA)
    assert stationary.x_0 == TAU
    assert stationary.x_minus1 == pytest.approx(156.25 / 8.375)
    assert oracle.stationary_moments(0.1, 0.01, 0.2).x_minus1 == math.inf

    with pytest.raises(ad.ContractError):
        oracle.uniform_moments(0.03, 0.001)


def test_stationary_density() -> None:
    """Unit tests for method."""
    r = np.linspace(0.005, 0.2, 40)
    reference = stats.gamma.pdf(r, a=9.375, scale=1.0 / 156.25)
    density = oracle.stationary_density(r, KAPPA, TAU, SIGMA)
    np.testing.assert_allclose(density, reference, rtol=1e-10)

    total, _ = integrate.quad(
        lambda x: oracle.stationary_density(x, KAPPA, TAU, SIGMA), 0.0, 1.0, limit=200
    )
    assert total == pytest.approx(1.0, abs=1e-6)

    with pytest.raises(ad.DomainError):
        oracle.stationary_density(np.array([0.1, 0.0]), KAPPA, TAU, SIGMA)


def test_stationary_density_feller_warning(caplog: pytest.LogCaptureFixture) -> None:
    """Unit tests for method."""
    assert not oracle.feller_condition(0.1, 0.01, 0.2)
    with caplog.at_level(logging.WARNING):
        h = oracle.stationary_density(np.array([0.01, 0.02]), 0.1, 0.01, 0.2)
    assert np.all(np.isfinite(h))
    assert "Feller" in caplog.text


def test_resample_uniform() -> None:
    """Unit tests for method."""
    rng = np.random.default_rng(2)
    s = oracle.resample_uniform(CIR_PARAMS, 0.001, 0.03, 500, rng)
    assert len(s) == 500
    assert np.all((s.xs >= 0.001) & (s.xs < 0.03))
    assert np.all(s.ys >= 0)
    assert s.dt == DT

    assert len(oracle.resample_uniform(CIR_PARAMS, 0.001, 0.03, 0, rng)) == 0
    with pytest.raises(ad.ContractError):
        oracle.resample_uniform(CIR_PARAMS, 0.03, 0.001, 10, rng)


def test_kappa_mle_on_resampled_pairs() -> None:
    """Unit tests for method."""
    n = 20000
    s = oracle.resample_uniform(CIR_PARAMS, 0.001, 0.03, n, np.random.default_rng(3))
    moments = oracle.uniform_moments(0.001, 0.03)
    std = oracle.kappa_asymptotic_std(TAU, SIGMA, DT, moments.x_minus1, moments.x_0, n)
    assert abs(oracle.kappa_mle(s, TAU) - KAPPA) <= 3.0 * std


def test_tau_mle_on_simulated_path() -> None:
    """Unit tests for method."""
    path = models.simulate_cir_path(TAU, 4000, CIR_PARAMS, "em", np.random.default_rng(4))
    estimate = oracle.tau_mle(oracle.PairSample.from_path(path.values, DT), KAPPA, SIGMA)
    bound = 3.0 * math.sqrt(SIGMA**2 * TAU / (KAPPA**2 * DT * 4000))
    assert bound == pytest.approx(0.0186, abs=1e-3)
    assert abs(estimate - TAU) <= bound


def test_histograms() -> None:
    """Unit tests for method."""
    h = oracle.histogram(np.array([0.0, 0.1, 0.2, 0.9, 1.0]), bins=2)
    np.testing.assert_array_equal(h.counts, [3.0, 2.0])
    np.testing.assert_allclose(h.probabilities(), [0.6, 0.4])
    np.testing.assert_allclose(h.density(), [1.2, 0.8])
    assert h.normalize().normalized

    constant = oracle.histogram(np.full(5, 2.0), bins=4)
    assert constant.counts.sum() == 5.0

    a, b = oracle.shared_histograms(np.array([0.0, 1.0]), np.array([2.0, 3.0]), bins=3)
    np.testing.assert_array_equal(a.edges, b.edges)
    assert a.edges[0] == 0.0
    assert a.edges[-1] == 3.0

    with pytest.raises(ad.ContractError):
        oracle.Histogram(np.array([0.0, 1.0]), np.zeros(1)).probabilities()
    with pytest.raises(ad.ShapeError):
        oracle.Histogram(np.array([0.0, 1.0]), np.zeros(2))


def test_discrete_kl_examples() -> None:
    """Unit tests for method."""
    assert oracle.discrete_kl(np.array([0.2, 0.8]), np.array([0.2, 0.8])) == 0.0
    kl = oracle.discrete_kl(np.array([1.0, 0.0]), np.array([0.5, 0.5]))
    assert kl == pytest.approx(math.log(2.0))

    # empty reference bins are floored instead of producing infinities
    assert np.isfinite(oracle.discrete_kl(np.array([0.5, 0.5]), np.array([1.0, 0.0])))

    h1 = oracle.histogram(np.array([0.1, 0.2]), bins=2, value_range=(0.0, 1.0))
    h2 = oracle.histogram(np.array([0.1, 0.2]), bins=3, value_range=(0.0, 1.0))
    with pytest.raises(ad.ContractError):
        oracle.discrete_kl(h1, h2)
    with pytest.raises(ad.ContractError):
        oracle.discrete_kl(np.ones(2), np.ones(3))


def test_discrete_kl_mixed_inputs() -> None:
    """Unit tests for method."""
    h = oracle.histogram(np.array([0.1, 0.2, 0.7]), bins=2, value_range=(0.0, 1.0))
    weights = np.array([1.0, 1.0])
    expected = oracle.discrete_kl(h.probabilities(), weights)
    assert oracle.discrete_kl(h, weights) == pytest.approx(expected)
    assert oracle.discrete_kl(weights, h) == pytest.approx(
        oracle.discrete_kl(weights, h.probabilities())
    )
    with pytest.raises(ad.ContractError):
        oracle.discrete_kl(h, np.ones(3))


def test_discrete_kl_is_nonnegative() -> None:
    """Unit tests for method."""
    rng = np.random.default_rng(5)
    for _ in range(100):
        p = rng.uniform(0.0, 1.0, 10) * (rng.uniform(size=10) > 0.2)
        q = rng.uniform(0.01, 1.0, 10)
        if p.sum() > 0:
            assert oracle.discrete_kl(p, q) >= -1e-12


def test_kl_landscape_vanishes_at_true_value() -> None:
    """Unit tests for method."""
    scan = oracle.kl_landscape(
        "kappa",
        [0.3, 0.5, 0.7],
        CIR_PARAMS,
        r0=TAU,
        steps=300,
        rng=np.random.default_rng(6),
        realizations=2,
        bins=20,
    )
    assert scan.kl_per_realization.shape == (2, 3)
    assert scan.kl[1] == 0.0
    assert np.all(scan.kl[[0, 2]] > 0)
    assert scan.curvature_at(0.5) > 0

    with pytest.raises(ad.ContractError):
        oracle.kl_landscape("sigma", [0.1], CIR_PARAMS, TAU, 10, np.random.default_rng(7))
    with pytest.raises(ad.ContractError):
        oracle.LandscapeScan("tau", np.ones(2), np.ones(2), np.ones((1, 2))).curvature_at(1.0)


@pytest.mark.slow
def test_tau_estimator_converges_at_root_n() -> None:
    """Unit tests for method."""
    sizes = np.array([500, 2000, 8000, 32000])
    w = np.random.default_rng(8).standard_normal((sizes[-1], 50))
    paths = models.simulate_cir_ensemble(TAU, CIR_PARAMS, w, scheme="em").values

    rms = []
    for n in sizes:
        errors = [
            oracle.tau_mle(oracle.PairSample.from_path(paths[: n + 1, j], DT), KAPPA) - TAU
            for j in range(paths.shape[1])
        ]
        rms.append(math.sqrt(np.mean(np.square(errors))))
    slope = np.polyfit(np.log(sizes), np.log(rms), 1)[0]
    assert slope == pytest.approx(-0.5, abs=0.15)


@pytest.mark.slow
def test_tau_estimator_matches_asymptotic_spread() -> None:
    """Unit tests for method."""
    n = 4000
    w = np.random.default_rng(10).standard_normal((n, 50))
    paths = models.simulate_cir_ensemble(TAU, CIR_PARAMS, w, scheme="em").values
    estimates = np.array(
        [
            oracle.tau_mle(oracle.PairSample.from_path(paths[:, j], DT), KAPPA)
            for j in range(paths.shape[1])
        ]
    )
    predicted = oracle.tau_asymptotic_std(KAPPA, SIGMA, DT, 1.0 / TAU, n)
    assert predicted == pytest.approx(0.0062, abs=1e-4)
    assert predicted / 1.5 <= estimates.std(ddof=1) <= 1.5 * predicted
    assert abs(estimates.mean() - TAU) < 0.003  # noqa: PLR2004


@pytest.mark.slow
def test_kappa_landscape_is_flatter_than_tau_landscape() -> None:
    """Unit tests for method."""
    p = models.CirParams(KAPPA, TAU, SIGMA, dt=0.001)
    kappa_scan = oracle.kl_landscape(
        "kappa", [0.4, 0.5, 0.6], p, TAU, 20000, np.random.default_rng(9), realizations=3
    )
    tau_scan = oracle.kl_landscape(
        "tau", [0.05, 0.06, 0.07], p, TAU, 20000, np.random.default_rng(9), realizations=3
    )
    assert 10.0 * kappa_scan.curvature_at(KAPPA) <= tau_scan.curvature_at(TAU)
