"""Conjugate models: normal with unknown mean and precision, exponential with unknown rate.

Both models are summarised by a sufficient statistic.  Simulation draws that
statistic from its exact sampling distribution instead of generating ``n`` raw
observations and summarising them; the two procedures are equal in
distribution, and the direct route keeps ``n = 1000`` tractable:

* normal: ``xbar ~ N(mu, 1/(n lam))`` and ``(n-1) s2 lam ~ chi2(n-1)``, independent;
* exponential: ``n xbar ~ Gamma(n, rate=theta)``.

The normal statistic is always ``(xbar, s2)`` with ``s2`` the unbiased sample
variance, so the normal model needs ``n >= 2`` for simulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np
from scipy import special

from .exceptions import (
    InvalidParameterError,
    InvalidStatisticError,
    MomentUndefinedError,
    SupportError,
)

NORMAL = "normal"
EXPONENTIAL = "exponential_rate"
MODELS = (NORMAL, EXPONENTIAL)


def _positive(name, value):
    value = float(value)
    if not (math.isfinite(value) and value > 0):
        raise InvalidParameterError(f"{name} must be positive and finite, got {value!r}")
    return value


@dataclass(frozen=True)
class NormalGammaParams:
    """Normal-gamma hyperparameters: ``lam ~ Gamma(alpha, rate=beta)``, ``mu | lam ~ N(mu0, 1/(kappa lam))``."""

    mu0: float
    kappa: float
    alpha: float
    beta: float

    def __post_init__(self):
        mu0 = float(self.mu0)
        if not math.isfinite(mu0):
            raise InvalidParameterError("mu0 must be finite")
        object.__setattr__(self, "mu0", mu0)
        for name in ("kappa", "alpha", "beta"):
            object.__setattr__(self, name, _positive(name, getattr(self, name)))

    model = NORMAL


@dataclass(frozen=True)
class GammaParams:
    """Gamma hyperparameters (shape ``alpha``, rate ``beta``) for an exponential rate."""

    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("alpha", "beta"):
            object.__setattr__(self, name, _positive(name, getattr(self, name)))

    model = EXPONENTIAL


PosteriorParams = Union[NormalGammaParams, GammaParams]


@dataclass(frozen=True)
class ObservedStat:
    """Observed sufficient statistic ``tau`` from a sample of size ``n``."""

    tau: tuple
    n: int

    def __post_init__(self):
        tau = tuple(float(t) for t in np.atleast_1d(np.asarray(self.tau, dtype=float)))
        if not tau or not all(math.isfinite(t) for t in tau):
            raise InvalidStatisticError(f"statistic must be a finite vector, got {self.tau!r}")
        if int(self.n) != self.n or self.n < 0:
            raise InvalidStatisticError(f"sample size must be a nonnegative integer, got {self.n!r}")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "n", int(self.n))

    @property
    def q(self):
        return len(self.tau)

    @classmethod
    def normal(cls, xbar, s2, n):
        return cls((xbar, s2), n)

    @classmethod
    def exponential(cls, xbar, n):
        return cls((xbar,), n)

    def as_array(self):
        return np.array(self.tau)


class NormalTheta(NamedTuple):
    """Mean and precision; fields may be scalars or equally shaped arrays."""

    mu: float
    lam: float


class RateTheta(NamedTuple):
    rate: float


def model_of(params):
    if isinstance(params, NormalGammaParams):
        return NORMAL
    if isinstance(params, GammaParams):
        return EXPONENTIAL
    raise InvalidParameterError(f"unsupported parameter object {type(params).__name__}")


def _check_normal_stat(stat):
    if stat.q != 2:
        raise InvalidStatisticError(f"normal model needs tau = (xbar, s2), got q={stat.q}")
    if stat.tau[1] <= 0:
        raise InvalidStatisticError(f"sample variance must be positive, got {stat.tau[1]}")


def _check_exponential_stat(stat):
    if stat.q != 1:
        raise InvalidStatisticError(f"exponential model needs a scalar statistic, got q={stat.q}")
    if stat.tau[0] <= 0:
        raise InvalidStatisticError(f"sample mean must be positive, got {stat.tau[0]}")


def check_stat(model, stat):
    if model == NORMAL:
        _check_normal_stat(stat)
    elif model == EXPONENTIAL:
        _check_exponential_stat(stat)
    else:
        raise InvalidParameterError(f"unknown model {model!r}")


# ---------------------------------------------------------------- updates

def update_normal(prior: NormalGammaParams, stat: ObservedStat) -> NormalGammaParams:
    """Normal-gamma posterior after observing ``(xbar, s2)`` from ``n`` points.

    ``n = 0`` means no data and returns the prior unchanged.
    """
    if stat.n == 0:
        return prior
    _check_normal_stat(stat)
    n = stat.n
    xbar, s2 = stat.tau
    k = prior.kappa
    kn = k + n
    mu_n = (k * prior.mu0 + n * xbar) / kn
    beta_n = prior.beta + (n - 1) * s2 / 2 + k * n * (xbar - prior.mu0) ** 2 / (2 * kn)
    return NormalGammaParams(mu_n, kn, prior.alpha + n / 2, beta_n)


def update_exponential(prior: GammaParams, stat: ObservedStat) -> GammaParams:
    """Gamma posterior ``(alpha + n, beta + n xbar)``."""
    if stat.n == 0:
        return prior
    _check_exponential_stat(stat)
    return GammaParams(prior.alpha + stat.n, prior.beta + stat.n * stat.tau[0])


def update(prior, stat):
    if model_of(prior) == NORMAL:
        return update_normal(prior, stat)
    return update_exponential(prior, stat)


# --------------------------------------------------------------- densities

def log_posterior_density(post, theta):
    """Log density of a normal-gamma or gamma distribution, vectorised over ``theta``."""
    if isinstance(post, NormalGammaParams):
        mu = np.asarray(theta[0], dtype=float)
        lam = np.asarray(theta[1], dtype=float)
        if np.any(lam <= 0):
            raise SupportError("precision must be positive")
        a, b, k = post.alpha, post.beta, post.kappa
        out = (a * math.log(b) - special.gammaln(a) + (a - 1) * np.log(lam) - b * lam
               + 0.5 * np.log(k * lam / (2 * math.pi)) - 0.5 * k * lam * (mu - post.mu0) ** 2)
        return out
    rate = np.asarray(theta[0] if isinstance(theta, RateTheta) else theta, dtype=float)
    if np.any(rate <= 0):
        raise SupportError("rate must be positive")
    a, b = post.alpha, post.beta
    return a * math.log(b) - special.gammaln(a) + (a - 1) * np.log(rate) - b * rate


def posterior_density(post, theta):
    """Density of ``post`` at ``theta`` (``NormalTheta``, ``RateTheta`` or a bare rate)."""
    out = np.exp(log_posterior_density(post, theta))
    return float(out) if np.ndim(out) == 0 else out


def _normal_exact_const(n):
    # density of (xbar, s2) given (mu, lam) is C_n s2^((n-3)/2) lam^(n/2) exp(-lam Q/2)
    m = (n - 1) / 2
    return 0.5 * math.log(n / (2 * math.pi)) + m * math.log(m) - special.gammaln(m)


def log_likelihood(stat: ObservedStat, theta, model=None):
    """Log sampling density of the statistic given ``theta``."""
    if model is None:
        model = NORMAL if isinstance(theta, NormalTheta) else EXPONENTIAL
    check_stat(model, stat)
    n = stat.n
    if model == NORMAL:
        xbar, s2 = stat.tau
        mu = np.asarray(theta[0], dtype=float)
        lam = np.asarray(theta[1], dtype=float)
        if n < 2:
            raise InvalidStatisticError("normal statistic density needs n >= 2")
        return (_normal_exact_const(n) + (n - 3) / 2 * math.log(s2) + n / 2 * np.log(lam)
                - lam * ((n - 1) * s2 + n * (xbar - mu) ** 2) / 2)
    rate = np.asarray(theta[0] if isinstance(theta, RateTheta) else theta, dtype=float)
    y = n * stat.tau[0]
    return math.log(n) + n * np.log(rate) + (n - 1) * math.log(y) - rate * y - special.gammaln(n)


def log_marginal_stat_density(prior, stat: ObservedStat, *, law="canonical", drop_constant=False):
    """Log marginal density ``f_T(tau)`` of the statistic under the prior.

    For the normal model ``law`` selects the reference measure.  ``"canonical"``
    gives ``B_n beta_n^(-alpha_n)``, the marginal of the raw-data likelihood
    written through ``(xbar, s2)``; ``"exact"`` gives the proper joint density
    of ``(xbar, s2)``, which carries the extra ``s2^((n-3)/2)`` Jacobian.  The
    exponential model has a single law.

    ``drop_constant=True`` drops every factor that does not depend on ``tau``
    at fixed ``n``, leaving what ratios ``f_T(tau)/f_T(tau')`` need.
    """
    if law not in ("canonical", "exact"):
        raise InvalidParameterError(f"unknown law {law!r}")
    post = update(prior, stat)
    log_tail = -post.alpha * math.log(post.beta)
    n = stat.n
    if isinstance(prior, NormalGammaParams):
        jac = (n - 3) / 2 * math.log(stat.tau[1]) if law == "exact" else 0.0
        if drop_constant:
            return log_tail + jac
        const = (0.5 * math.log(prior.kappa / post.kappa) + prior.alpha * math.log(prior.beta)
                 + special.gammaln(post.alpha) - special.gammaln(prior.alpha))
        if law == "exact":
            const += _normal_exact_const(n)
        else:
            const -= n / 2 * math.log(2 * math.pi)
        return const + jac + log_tail
    y = n * stat.tau[0]
    jac = (n - 1) * math.log(y)
    if drop_constant:
        return log_tail + jac
    const = (math.log(n) - special.gammaln(n) + prior.alpha * math.log(prior.beta)
             + special.gammaln(post.alpha) - special.gammaln(prior.alpha))
    return const + jac + log_tail


def marginal_stat_density(prior, stat, *, law="canonical", drop_constant=False):
    return math.exp(log_marginal_stat_density(prior, stat, law=law, drop_constant=drop_constant))


# ---------------------------------------------------------------- sampling

def as_generator(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sample_prior(prior, rng, size=None):
    """Draw ``theta`` from the prior; ``size=None`` gives scalars."""
    rng = as_generator(rng)
    if isinstance(prior, NormalGammaParams):
        lam = rng.gamma(prior.alpha, 1.0 / prior.beta, size)
        mu = prior.mu0 + rng.standard_normal(size) / np.sqrt(prior.kappa * lam)
        return NormalTheta(mu, lam)
    return RateTheta(rng.gamma(prior.alpha, 1.0 / prior.beta, size))


def sample_stats(theta, n, rng):
    """Simulate statistics for an array of parameters; returns shape ``(m, q)``."""
    rng = as_generator(rng)
    n = int(n)
    if isinstance(theta, NormalTheta):
        if n < 2:
            raise InvalidStatisticError("normal model needs n >= 2 to define s2")
        mu = np.asarray(theta.mu, dtype=float)
        lam = np.asarray(theta.lam, dtype=float)
        if np.any(lam <= 0):
            raise SupportError("precision must be positive")
        xbar = mu + rng.standard_normal(mu.shape) / np.sqrt(n * lam)
        s2 = rng.chisquare(n - 1, lam.shape) / ((n - 1) * lam)
        return np.stack([np.atleast_1d(xbar), np.atleast_1d(s2)], axis=-1)
    rate = np.asarray(theta[0] if isinstance(theta, RateTheta) else theta, dtype=float)
    if n < 1:
        raise InvalidStatisticError("n must be at least 1")
    if np.any(rate <= 0):
        raise SupportError("rate must be positive")
    return np.atleast_1d(rng.gamma(n, 1.0 / rate) / n)[..., None]


def sample_stat(theta, n, rng) -> ObservedStat:
    """Simulate one observed statistic for a scalar ``theta``."""
    tau = sample_stats(theta, n, rng)
    return ObservedStat(tuple(tau.reshape(-1)), n)


# ----------------------------------------------------------------- moments

def _gamma_power_moment(alpha, beta, m):
    """E[lam^m] for lam ~ Gamma(alpha, rate=beta) and integer m."""
    if m >= 0:
        out = 1.0
        for i in range(m):
            out *= (alpha + i) / beta
        return out
    if alpha <= -m:
        raise MomentUndefinedError(f"E[lam^{m}] needs alpha > {-m}, got alpha={alpha}")
    out = 1.0
    for i in range(1, -m + 1):
        out *= beta / (alpha - i)
    return out


def _double_factorial_odd(k):
    # (k-1)!! for even k, the k-th standard normal moment
    out = 1
    for j in range(k - 1, 0, -2):
        out *= j
    return out


def eta_moment(post, powers):
    """Closed-form posterior moment.

    Normal model: ``powers = (a, b)`` gives ``E[mu^a lam^b]`` with ``a >= 0`` and
    integer ``b``; negative ``b`` needs ``alpha > |b|`` once the mu-expansion is
    accounted for.  Exponential model: ``powers = (k,)`` or ``k`` gives ``E[theta^k]``.
    """
    powers = tuple(int(p) for p in np.atleast_1d(powers))
    if isinstance(post, GammaParams):
        if len(powers) != 1:
            raise InvalidParameterError("exponential model takes a single power")
        return _gamma_power_moment(post.alpha, post.beta, powers[0])
    if len(powers) != 2:
        raise InvalidParameterError("normal model takes powers (a, b)")
    a, b = powers
    if a < 0:
        raise InvalidParameterError("power of mu must be nonnegative")
    # mu | lam = mu_n + Z / sqrt(kappa_n lam); expand the binomial, odd Z-moments vanish
    total = 0.0
    for k in range(0, a + 1, 2):
        coef = math.comb(a, k) * post.mu0 ** (a - k) * _double_factorial_odd(k) * post.kappa ** (-k / 2)
        total += coef * _gamma_power_moment(post.alpha, post.beta, b - k // 2)
    return total


def natural_moment(post, powers):
    """``E[prod eta_i^k_i]`` in natural parameters.

    Normal: ``eta = (mu lam, -lam/2)``.  Exponential: ``eta = -theta``.
    """
    powers = tuple(int(p) for p in np.atleast_1d(powers))
    if isinstance(post, GammaParams):
        (k,) = powers
        return (-1) ** k * eta_moment(post, (k,))
    i, j = powers
    return (-0.5) ** j * eta_moment(post, (i, i + j))


def natural_moment_table(post, order=4):
    """All natural-parameter moments of total degree ``<= order``, keyed by exponent tuples."""
    q = 2 if isinstance(post, NormalGammaParams) else 1
    table = {}
    if q == 1:
        for k in range(order + 1):
            table[(k,)] = natural_moment(post, (k,))
        return table
    for i in range(order + 1):
        for j in range(order + 1 - i):
            table[(i, j)] = natural_moment(post, (i, j))
    return table


def posterior_mean(post):
    if isinstance(post, NormalGammaParams):
        return NormalTheta(post.mu0, post.alpha / post.beta)
    return RateTheta(post.alpha / post.beta)
