import math

import numpy as np
import pytest
from scipy import integrate, stats

from relabc import AcceptanceRegion, GammaParams, ObservedStat, update
from relabc.exceptions import InvalidParameterError
from relabc.oracle import (
    QuadratureSpec,
    acceptance_probability,
    kl_numeric,
    lemma_check,
    perturbation_ratio,
    perturbed_bias,
    perturbed_density,
    perturbed_moment,
)

EXP_PRIOR = GammaParams(2.0, 1.5)
EXP_STAT = ObservedStat.exponential(0.9, 25)


def _exp_closed(prior, stat, eps):
    """Perturbed density and acceptance probability of the exponential model from scipy laws."""
    n, tau = stat.n, stat.tau[0]
    law = stats.betaprime(n, prior.alpha, scale=prior.beta)
    p = law.cdf(n * (tau + eps)) - law.cdf(n * (tau - eps))

    def dens(t):
        xbar = stats.gamma(n, scale=1 / (n * t))
        hit = xbar.cdf(tau + eps) - xbar.cdf(tau - eps)
        return stats.gamma.pdf(t, prior.alpha, scale=1 / prior.beta) * hit / p

    return dens, p


def test_exponential_acceptance_probability_closed_form():
    for eps in (0.01, 0.05, 0.2):
        _, p = _exp_closed(EXP_PRIOR, EXP_STAT, eps)
        got = acceptance_probability(EXP_PRIOR, EXP_STAT, AcceptanceRegion.ball([0.9], eps))
        assert got == pytest.approx(p, rel=1e-8)


def test_exponential_density_closed_form():
    eps = 0.1
    dens, _ = _exp_closed(EXP_PRIOR, EXP_STAT, eps)
    region = AcceptanceRegion.ball([0.9], eps)
    theta = np.array([0.5, 1.0, 1.4])
    np.testing.assert_allclose(perturbed_density(EXP_PRIOR, EXP_STAT, region, theta),
                               [dens(t) for t in theta], rtol=1e-7)


def test_exponential_kl_and_bias_against_one_dimensional_quadrature():
    eps = 0.1
    dens, _ = _exp_closed(EXP_PRIOR, EXP_STAT, eps)
    post = update(EXP_PRIOR, EXP_STAT)
    f = stats.gamma(post.alpha, scale=1 / post.beta)
    lo, hi = f.ppf(1e-14), f.ppf(1 - 1e-14)
    kl = integrate.quad(lambda t: f.pdf(t) * math.log(f.pdf(t) / dens(t)), lo, hi, epsabs=0, epsrel=1e-10,
                        limit=200)[0]
    mean = integrate.quad(lambda t: t * dens(t), lo, hi, epsabs=0, epsrel=1e-12, limit=200)[0]
    region = AcceptanceRegion.ball([0.9], eps)
    assert kl_numeric(EXP_PRIOR, EXP_STAT, region) == pytest.approx(kl, rel=1e-5)
    assert perturbed_moment(EXP_PRIOR, EXP_STAT, region, "theta") == pytest.approx(mean, rel=1e-9)
    assert perturbed_bias(EXP_PRIOR, EXP_STAT, region, "theta") == pytest.approx(mean - f.mean(), rel=1e-5)


def test_normal_acceptance_probability_by_simulation(prior, stat20):
    # prior predictive of (xbar, s2): draw the parameter, then the two independent statistics
    rng = np.random.default_rng(7)
    m, n = 2_000_000, stat20.n
    lam = rng.gamma(prior.alpha, 1 / prior.beta, m)
    mu = rng.normal(prior.mu0, 1 / np.sqrt(prior.kappa * lam))
    xbar = rng.normal(mu, 1 / np.sqrt(n * lam))
    s2 = rng.chisquare(n - 1, m) / ((n - 1) * lam)
    axes = np.array([0.15, 0.3])
    hit = ((xbar - 0.5) / axes[0]) ** 2 + ((s2 - 1.2) / axes[1]) ** 2 <= 1
    p_mc = hit.mean()
    got = acceptance_probability(prior, stat20, AcceptanceRegion.ellipse(stat20.tau, axes))
    assert abs(got - p_mc) < 5 * math.sqrt(p_mc * (1 - p_mc) / m)


def test_tiny_region_recovers_the_posterior(prior, stat20, post20):
    region = AcceptanceRegion.ellipse(stat20.tau, [1e-6, 1e-6])
    mu, lam = np.array([0.3, 0.5, 0.8]), np.array([0.5, 0.9, 1.3])
    # normal-gamma density written out by hand
    a, b, k, m0 = post20.alpha, post20.beta, post20.kappa, post20.mu0
    want = (stats.gamma.pdf(lam, a, scale=1 / b) * stats.norm.pdf(mu, m0, 1 / np.sqrt(k * lam)))
    for law in ("exact", "canonical"):
        np.testing.assert_allclose(perturbed_density(prior, stat20, region, (mu, lam), law=law), want, rtol=1e-8)
        # at this size log r is mostly rounding noise, so skip the self-convergence check
        assert 0 <= kl_numeric(prior, stat20, region, QuadratureSpec(check=False), law=law) < 1e-15


def test_kl_positive_and_growing(prior, stat20):
    values = [kl_numeric(prior, stat20, AcceptanceRegion.ellipse(stat20.tau, [e, 2 * e])) for e in (0.02, 0.05, 0.1)]
    assert 0 < values[0] < values[1] < values[2]


def test_ratio_averages_to_one(prior, stat20, post20):
    region = AcceptanceRegion.ellipse(stat20.tau, [0.1, 0.2])
    assert perturbed_moment(prior, stat20, region, lambda th: np.ones_like(th.mu)) == pytest.approx(1.0, abs=1e-10)
    r = perturbation_ratio(prior, stat20, region, (0.4, 1.0))
    f = perturbed_density(prior, stat20, region, (0.4, 1.0))
    a, b, k, m0 = post20.alpha, post20.beta, post20.kappa, post20.mu0
    base = stats.gamma.pdf(1.0, a, scale=1 / b) * stats.norm.pdf(0.4, m0, 1 / math.sqrt(k))
    assert f == pytest.approx(r * base, rel=1e-9)


def test_refined_spec_agrees(prior, stat20):
    region = AcceptanceRegion.ellipse(stat20.tau, [0.1, 0.2])
    coarse = perturbed_bias(prior, stat20, region, "mu", QuadratureSpec(check=False))
    fine = perturbed_bias(prior, stat20, region, "mu", QuadratureSpec(64, 96, check=False))
    assert coarse == pytest.approx(fine, rel=1e-8)


def test_errors(prior, stat20):
    region = AcceptanceRegion.ellipse(stat20.tau, [0.1, 0.2])
    with pytest.raises(InvalidParameterError):
        kl_numeric(prior, stat20, AcceptanceRegion.ellipse([0.0, 1.2], [0.1, 0.2]))
    with pytest.raises(InvalidParameterError):
        kl_numeric(prior, stat20, region, law="approximate")
    with pytest.raises(InvalidParameterError):
        perturbed_moment(prior, stat20, region, "skew")
    with pytest.raises(InvalidParameterError):
        perturbed_density(prior, stat20, region, (0.0, -1.0))
    with pytest.raises(InvalidParameterError):
        QuadratureSpec(region_nodes=4)


def test_exponential_lemma_check():
    check = lemma_check(EXP_PRIOR, EXP_STAT, 1.1, 0, 0.02)
    assert check.order == pytest.approx(2.0, abs=0.05)
    assert check.second_rel_error < 1e-3
    with pytest.raises(InvalidParameterError):
        lemma_check(EXP_PRIOR, EXP_STAT, 1.1, 1, 0.02)
