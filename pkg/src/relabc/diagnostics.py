"""Closed-form predictors: leading-order estimator bias and ellipse/ball rejection-rate ratios."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import (
    IncompleteMomentTableError,
    InvalidParameterError,
    InvalidStatisticError,
    MomentUndefinedError,
)
from .models import GammaParams, NormalGammaParams, eta_moment


@dataclass(frozen=True, eq=False)
class BiasPrediction:
    """``predicted_bias = sum_i eps_i^2 C_i``."""

    coefficients: np.ndarray
    predicted_bias: float
    observable: str
    epsilon: np.ndarray
    limit: float = float("nan")


def _prediction(coefs, eps, observable, limit=float("nan")):
    coefs = np.atleast_1d(np.asarray(coefs, dtype=float))
    eps = np.broadcast_to(np.asarray(eps, dtype=float), coefs.shape).copy()
    return BiasPrediction(coefs, float(np.sum(eps ** 2 * coefs)), observable, eps, limit)


def bias_normal_mean(post: NormalGammaParams, n, eps) -> BiasPrediction:
    """Bias of the particle mean of ``mu``: ``C_1 = (n^2/4)(mu_n/kappa_n)(alpha_n/beta_n)``, ``C_2 = 0``."""
    c1 = n ** 2 / 4 * post.mu0 / post.kappa * post.alpha / post.beta
    return _prediction([c1, 0.0], eps, "mean_mu")


def bias_normal_variance(post: NormalGammaParams, n, eps) -> BiasPrediction:
    """Bias of the particle mean of ``sigma^2 = 1/lam``; both coefficients are negative."""
    a, b = post.alpha, post.beta
    if a <= 1:
        raise MomentUndefinedError(f"E[1/lam] needs alpha_n > 1, got {a}")
    c1 = n ** 2 / 8 * (-2 * post.mu0 ** 2 * (a / b) / (a - 1) - (1 / post.kappa) / (a - 1))
    c2 = n ** 2 / 32 * (a / b) * (-2 / (a - 1))
    return _prediction([c1, c2], eps, "variance_sigma2")


def exponential_bias_limit(prior: GammaParams, tau_star):
    """Large-``n`` limit of the exponential-rate bias coefficient: ``(alpha + 2 - beta/tau*) / (3 tau*^3)``."""
    if not tau_star > 0:
        raise InvalidStatisticError(f"tau* must be positive, got {tau_star}")
    return (prior.alpha + 2 - prior.beta / tau_star) / (3 * tau_star ** 3)


def bias_exponential_rate(post: GammaParams, n, tau_star, eps, prior: GammaParams = None) -> BiasPrediction:
    """``C = (n^2/3)(alpha_n/beta_n^2)[(alpha_n+1)/beta_n - (n-1)/(n tau*)]``.

    When ``prior`` is given the large-``n`` limit is attached as ``limit``.
    """
    if not tau_star > 0:
        raise InvalidStatisticError(f"tau* must be positive, got {tau_star}")
    a, b = post.alpha, post.beta
    c = n ** 2 / 3 * a / b ** 2 * ((a + 1) / b - (n - 1) / (n * tau_star))
    limit = exponential_bias_limit(prior, tau_star) if prior is not None else float("nan")
    return _prediction([c], eps, "rate_theta", limit)


def _get(table, key):
    try:
        return table[key]
    except KeyError:
        raise IncompleteMomentTableError(f"moment table lacks entry {key}") from None


def bias_generic(eta_moments, logR_grad, n, q, eps, h_moments, observable="h") -> BiasPrediction:
    """``C_i = n^2/(2(q+2)) E[h w_i]`` from moment tables.

    ``eta_moments`` maps exponent tuples to ``E[prod eta^k]``; ``h_moments``
    maps the same keys to ``E[h prod eta^k]`` and must include the zero tuple
    and, for each ``i``, first and second powers of ``eta_i``.
    """
    g = np.broadcast_to(np.asarray(logR_grad, dtype=float), (q,))
    zero = (0,) * q
    eh = _get(h_moments, zero)
    coefs = np.empty(q)
    for i in range(q):
        e1 = tuple(1 if j == i else 0 for j in range(q))
        e2 = tuple(2 if j == i else 0 for j in range(q))
        cov2 = _get(h_moments, e2) - eh * _get(eta_moments, e2)
        cov1 = _get(h_moments, e1) - eh * _get(eta_moments, e1)
        coefs[i] = n ** 2 / (2 * (q + 2)) * (cov2 + 2 * g[i] * cov1)
    return _prediction(coefs, eps, observable)


def h_moment_table(post, h_powers):
    """``E[h eta^k]`` for ``h = mu^a lam^b`` (normal) or ``theta^k`` (exponential), up to degree 2."""
    if isinstance(post, GammaParams):
        (hk,) = h_powers
        return {(k,): (-1) ** k * eta_moment(post, (hk + k,)) for k in range(3)}
    ha, hb = h_powers
    out = {}
    for i in range(3):
        for j in range(3 - i):
            out[(i, j)] = (-0.5) ** j * eta_moment(post, (ha + i, hb + i + j))
    return out


# ---------------------------------------------------------- rejection ratio

def q_weights_normal(post: NormalGammaParams):
    """``q_1 = E[eta_1^2]``, ``q_2 = E[eta_2^2]`` (``R`` is constant for this model)."""
    a, b = post.alpha, post.beta
    q1 = post.mu0 ** 2 * (a + 1) * a / b ** 2 + a / (post.kappa * b)
    q2 = 0.25 * (a + 1) * a / b ** 2
    return np.array([q1, q2])


def q_weights_exponential(post: GammaParams, n, tau_star):
    """``R''/R + E eta^2 + 2 (log R)' E eta`` with ``R(y) = y^(n-1)/Gamma(n)`` at ``y = n tau*``."""
    if not tau_star > 0:
        raise InvalidStatisticError(f"tau* must be positive, got {tau_star}")
    y = n * tau_star
    a, b = post.alpha, post.beta
    return np.array([(n - 1) * (n - 2) / y ** 2 + a * (a + 1) / b ** 2 - 2 * (n - 1) / y * a / b])


def rejection_ratio_generic(q_weights, n, eps_ball, eps_vector):
    """Asymptotic ratio of ellipse to ball mean rejection rates.

    ``U = (eps^q/prod eps_i) (1 + n^2 eps^2 sum q_i / (2(q+2))) / (1 + n^2 sum eps_i^2 q_i / (2(q+2)))``.
    """
    qw = np.atleast_1d(np.asarray(q_weights, dtype=float))
    ev = np.atleast_1d(np.asarray(eps_vector, dtype=float))
    if qw.shape != ev.shape:
        raise InvalidParameterError("q_weights and eps_vector must have equal length")
    eps = float(eps_ball)
    if eps <= 0 or np.any(ev <= 0):
        raise InvalidParameterError("tolerances must be positive")
    q = qw.size
    k = n ** 2 / (2 * (q + 2))
    return float(np.prod(eps / ev) * (1 + k * eps ** 2 * qw.sum()) / (1 + k * np.sum(ev ** 2 * qw)))


def rejection_ratio_normal(post: NormalGammaParams, n, eps_ball, eps_ellipse):
    return rejection_ratio_generic(q_weights_normal(post), n, eps_ball, eps_ellipse)
