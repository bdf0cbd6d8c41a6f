"""Leading-order relative entropy between the posterior and its ABC perturbation.

For an acceptance region with per-component tolerances ``eps`` the divergence
behaves, as ``n |eps| -> 0``, like a quadratic form in ``u = eps**2``::

    H(eps) ~ n^4 / (8 (q+2)^2) * E[(sum_i u_i w_i)^2]

with mean-zero weights ``w_i = eta_i^2 - E eta_i^2 + 2 g_i (eta_i - E eta_i)``,
``eta`` the natural parameter and ``g_i`` the gradient of ``log R`` at
``n tau*``.  The coefficients depend only on posterior moments, which the
conjugate models provide in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .exceptions import IncompleteMomentTableError, InvalidParameterError, InvalidStatisticError
from .models import GammaParams, NormalGammaParams, natural_moment_table

#: ``n * max(eps)`` above which the expansion is flagged as out of range.
VALIDITY_THRESHOLD = 0.5


@dataclass(frozen=True, eq=False)
class REQuadraticForm:
    """``u -> sum_i diag_i u_i^2 + sum_{i<j} cross_ij u_i u_j`` with ``u = eps**2``.

    ``cross`` is stored as a full symmetric matrix with zero diagonal; only the
    upper triangle enters the sum.
    """

    diag: np.ndarray
    cross: np.ndarray
    n: int
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        diag = np.atleast_1d(np.asarray(self.diag, dtype=float))
        q = diag.size
        cross = np.asarray(self.cross, dtype=float).reshape(q, q) if q > 1 else np.zeros((1, 1))
        cross = np.triu(cross, 1)
        cross = cross + cross.T
        diag.setflags(write=False)
        cross.setflags(write=False)
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "cross", cross)

    def __eq__(self, other):
        if not isinstance(other, REQuadraticForm):
            return NotImplemented
        return (self.n == other.n and np.array_equal(self.diag, other.diag)
                and np.array_equal(self.cross, other.cross))

    __hash__ = None

    @property
    def q(self):
        return self.diag.size

    @property
    def total(self):
        """Coefficient of ``eps^4`` when all tolerances are equal."""
        return float(self.diag.sum() + np.triu(self.cross, 1).sum())

    @property
    def matrix(self):
        """Symmetric ``M`` with ``form(u) = u @ M @ u / 2``."""
        return 2 * np.diag(self.diag) + self.cross

    def value_u(self, u):
        u = np.asarray(u, dtype=float)
        return float(self.diag @ u ** 2 + 0.5 * u @ self.cross @ u)

    def __call__(self, eps):
        eps = np.broadcast_to(np.asarray(eps, dtype=float), (self.q,))
        return self.value_u(eps ** 2)

    value = __call__

    def ball_value(self, eps):
        return self.total * float(eps) ** 4

    def outside_validity(self, eps):
        return bool(self.n * float(np.max(eps)) > VALIDITY_THRESHOLD)


def _normal_coefficients(a, b, mu, k, n, c5):
    s = n ** 4 / 128
    v = a * (a + 1) * (4 * a + 6) / b ** 4
    d1 = s * (mu ** 4 * v + mu ** 2 / k * a * (a + 1) * (c5 * a + 12) / b ** 3 + (2 * a + 3) * a / (k ** 2 * b ** 2))
    d2 = s / 16 * v
    c = s / 2 * (mu ** 2 * v + 2 / k * a * (a + 1) / b ** 3)
    return d1, d2, c


def re_form_normal(post: NormalGammaParams, n: int, *, legacy=False) -> REQuadraticForm:
    """Quadratic form for the normal model with statistic ``(xbar, s2)``.

    The ``mu_n^2`` term of the first diagonal coefficient carries
    ``alpha_n (alpha_n + 1)(4 alpha_n + 12) / beta_n^3``, which is what the
    posterior moments give.  ``legacy=True`` switches to ``5 alpha_n + 12``,
    the value behind the historical reference tables.
    """
    if not isinstance(post, NormalGammaParams):
        raise InvalidParameterError("re_form_normal needs NormalGammaParams")
    d1, d2, c = _normal_coefficients(post.alpha, post.beta, post.mu0, post.kappa, n, 5 if legacy else 4)
    return REQuadraticForm([d1, d2], [[0, c], [c, 0]], int(n), {"model": "normal", "legacy": bool(legacy)})


def _exponential_bracket(post, n, tau_star, cross_factor):
    a, b = post.alpha, post.beta
    g = (n - 1) / n / tau_star
    return (a * (a + 1) * (4 * a + 6) / b ** 4 + 4 * g ** 2 * a / b ** 2
            - cross_factor * g * a * (a + 1) / b ** 3)


def re_form_exponential(post: GammaParams, n: int, tau_star: float, *, legacy=False) -> REQuadraticForm:
    """Quadratic form for the exponential-rate model (a single coefficient of ``eps^4``).

    The cross term of ``E[w^2]`` is ``-4 g Cov(theta^2, theta) = -8 g alpha_n(alpha_n+1)/beta_n^3``
    with ``g = (n-1)/(n tau*)``.  ``legacy=True`` uses ``-4 g alpha_n(alpha_n+1)/beta_n^3``.
    """
    if not isinstance(post, GammaParams):
        raise InvalidParameterError("re_form_exponential needs GammaParams")
    if not tau_star > 0:
        raise InvalidStatisticError(f"tau* must be positive, got {tau_star}")
    br = _exponential_bracket(post, n, tau_star, 4 if legacy else 8)
    return REQuadraticForm([n ** 4 / 72 * br], [[0.0]], int(n),
                           {"model": "exponential_rate", "legacy": bool(legacy)})


def exponential_large_n_coefficient(n, tau_star, *, legacy=False):
    """Large-``n`` approximation of the exponential ``eps^4`` coefficient.

    The three terms of order ``1/n`` in ``E[w^2]`` cancel, leaving
    ``2 Var(theta)^2 ~ 2 / (n tau*^2)^2`` and a coefficient ``n^2 / (36 tau*^4)``.
    With ``legacy=True`` the cancellation is incomplete and the approximation is
    ``n^3 / (18 tau*^4)``.
    """
    if not tau_star > 0:
        raise InvalidStatisticError(f"tau* must be positive, got {tau_star}")
    if legacy:
        return n ** 3 / (18 * tau_star ** 4)
    return n ** 2 / (36 * tau_star ** 4)


# ------------------------------------------------------------ generic case

def _need(table, key):
    try:
        return table[key]
    except KeyError:
        raise IncompleteMomentTableError(f"moment table lacks E[eta^{key}]") from None


def _unit(q, i, k):
    e = [0] * q
    e[i] = k
    return tuple(e)


def _pair(q, i, ki, j, kj):
    e = [0] * q
    e[i] += ki
    e[j] += kj
    return tuple(e)


def weight_covariance(table, logR_grad, q):
    """Matrix ``E[w_i w_j]`` assembled from raw natural-parameter moments."""
    g = np.broadcast_to(np.asarray(logR_grad, dtype=float), (q,))
    m1 = [_need(table, _unit(q, i, 1)) for i in range(q)]
    m2 = [_need(table, _unit(q, i, 2)) for i in range(q)]

    def cov(i, ki, j, kj):
        return _need(table, _pair(q, i, ki, j, kj)) - (m1 if ki == 1 else m2)[i] * (m1 if kj == 1 else m2)[j]

    out = np.empty((q, q))
    for i in range(q):
        for j in range(q):
            out[i, j] = (cov(i, 2, j, 2) + 2 * g[j] * cov(i, 2, j, 1)
                         + 2 * g[i] * cov(i, 1, j, 2) + 4 * g[i] * g[j] * cov(i, 1, j, 1))
    return out


def re_form_generic(eta_moments, logR_grad, n: int, q: int) -> REQuadraticForm:
    """Quadratic form from a table of natural-parameter moments.

    ``eta_moments`` maps exponent tuples (length ``q``) to ``E[prod eta_i^k_i]``
    and must cover total degree 4.  ``logR_grad`` holds ``d log R / d y_i`` at
    ``y = n tau*``; zeros give the constant-``R`` case.
    """
    w = weight_covariance(eta_moments, logR_grad, q)
    s = n ** 4 / (8 * (q + 2) ** 2)
    cross = 2 * s * w
    np.fill_diagonal(cross, 0.0)
    return REQuadraticForm(s * np.diag(w), cross, int(n), {"model": "generic"})


def _gamma_rule(alpha, m):
    """Gauss rule for the Gamma(alpha, 1) law via its Jacobi matrix (weights sum to one)."""
    k = np.arange(m)
    x, v = linalg.eigh_tridiagonal(2 * k + alpha, np.sqrt(k[1:] * (k[1:] + alpha - 1)))
    return x, v[0] ** 2


def weight_mean(post, i, *, logR_grad=0.0, table=None, nodes=16):
    """``E[w_i]`` under the posterior, integrated numerically.

    The centring constants come from ``table`` (closed-form moments by
    default) while the expectation is taken by Gauss-Laguerre quadrature over
    the precision or rate, with the conditional normal moments of ``mu``
    done analytically.  The result vanishes when the table agrees with the
    posterior law.
    """
    if table is None:
        table = natural_moment_table(post, order=2)
    q = len(next(iter(table)))
    if not 0 <= i < q:
        raise InvalidParameterError(f"component {i} out of range for q={q}")
    e2, e1 = _need(table, _unit(q, i, 2)), _need(table, _unit(q, i, 1))
    x, w = _gamma_rule(post.alpha, nodes)
    lam = x / post.beta
    if isinstance(post, GammaParams):
        m1, m2 = -lam, lam ** 2
    elif i == 0:
        m1, m2 = post.mu0 * lam, lam ** 2 * post.mu0 ** 2 + lam / post.kappa
    else:
        m1, m2 = -lam / 2, lam ** 2 / 4
    return float(w @ ((m2 - e2) + 2 * float(logR_grad) * (m1 - e1)))


def exponential_logR_grad(n, tau_star):
    """``d log R(y)/dy`` at ``y = n tau*`` for ``R(y) = y^(n-1)/Gamma(n)``."""
    return (n - 1) / (n * tau_star)


def form_for(post, n, tau_star=None, *, legacy=False):
    """Closed-form quadratic form for either model."""
    if isinstance(post, NormalGammaParams):
        return re_form_normal(post, n, legacy=legacy)
    if tau_star is None:
        raise InvalidStatisticError("exponential model needs tau*")
    return re_form_exponential(post, n, float(np.atleast_1d(tau_star)[0]), legacy=legacy)


def ball_epsilon_for(form: REQuadraticForm, target):
    """Common tolerance at which the form equals ``target``."""
    return (target / form.total) ** 0.25 if target > 0 else 0.0


__all__ = [
    "REQuadraticForm", "re_form_normal", "re_form_exponential", "re_form_generic",
    "weight_mean", "weight_covariance", "exponential_large_n_coefficient",
    "exponential_logR_grad", "form_for", "VALIDITY_THRESHOLD",
]
