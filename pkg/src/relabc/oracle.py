"""Quadrature ground truth for the perturbed posterior.

The ABC output density is ``f_eps(theta) = f(theta | tau*) r(theta)`` with::

    r(theta) = avg_D f(tau | theta) / f(tau* | theta)  /  avg_D f_T(tau) / f_T(tau*)

where ``avg_D`` is the uniform average over the acceptance region.  Numerator
and denominator share one set of region nodes, so every normalising constant
that does not depend on ``tau`` cancels.  Expectations under ``f_eps`` are
computed as posterior expectations of ``h r``.

Rules used:

* region: the unit disk is parametrised by ``(t cos phi, sin phi)`` with
  Gauss-Legendre nodes in ``t`` and ``phi``; the Jacobian ``cos^2 phi`` is
  smooth, so the rule converges spectrally.  In one dimension plain
  Gauss-Legendre is used.  Ellipses and general metrics are affine images.
* precision or rate: Gauss-Legendre over the central ``1 - 2 tail_mass``
  interval of the gamma posterior, weighted by its density.
* mean given precision: Gauss-Hermite against the conditional normal, which
  is exact for polynomials and needs no truncation.

Two sampling laws are available for the normal model.  ``"exact"`` is the
true joint law of ``(xbar, s2)``, the one ``run_abc`` simulates, and is
required for acceptance probabilities.  ``"canonical"`` treats the statistic
as ``(xbar, mean of squares)`` with a constant base measure, which is the
setting the leading-order expansions assume; the region's axes then apply to
that pair.  The exponential model has a single law.

Every public function checks self-convergence by repeating the computation
with doubled node counts and raises ``QuadratureError`` when the two differ by
more than the ``QuadratureSpec`` tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from scipy import special, stats

from .exceptions import InvalidParameterError, MomentUndefinedError, QuadratureError
from .models import (
    EXPONENTIAL,
    NORMAL,
    NormalTheta,
    RateTheta,
    check_stat,
    log_marginal_stat_density,
    model_of,
    update,
)
from .sampler import AcceptanceRegion

LAWS = ("exact", "canonical")


@dataclass(frozen=True)
class QuadratureSpec:
    region_nodes: int = 32
    theta_nodes: int = 48
    tail_mass: float = 1e-13
    rel_tol: float = 1e-6
    density_rel_tol: float = 1e-7
    check: bool = True

    def __post_init__(self):
        if self.region_nodes < 16 or self.theta_nodes < 16:
            raise InvalidParameterError("node counts must be at least 16")
        if not 0 < self.tail_mass < 1e-12:
            raise InvalidParameterError("tail_mass must lie in (0, 1e-12) to keep coverage above 1 - 2e-12")

    def refined(self):
        return replace(self, region_nodes=2 * self.region_nodes, theta_nodes=2 * self.theta_nodes)


DEFAULT_SPEC = QuadratureSpec()


# ------------------------------------------------------------------ rules

def _unit_ball_rule(q, m):
    x, w = np.polynomial.legendre.leggauss(m)
    if q == 1:
        return x[:, None], w / 2
    if q != 2:
        raise InvalidParameterError("region quadrature supports q = 1 or 2")
    phi = x * np.pi / 2
    t, p = np.meshgrid(x, phi, indexing="ij")
    wt = np.outer(w, w * np.pi / 2 * np.cos(phi) ** 2) / np.pi
    pts = np.column_stack([(np.cos(p) * t).ravel(), np.sin(p).ravel()])
    return pts, wt.ravel()


class _Frame:
    """Model, law, posterior and region expressed in the law's coordinates."""

    def __init__(self, prior, stat, region, law, transform=None):
        if law not in LAWS:
            raise InvalidParameterError(f"unknown law {law!r}")
        self.model = model_of(prior)
        check_stat(self.model, stat)
        self.prior, self.stat, self.law = prior, stat, law
        self.n = stat.n
        self.post = update(prior, stat)
        center = np.asarray(stat.tau, dtype=float)
        if transform is None:
            if not np.allclose(region.center, center, rtol=0, atol=1e-12):
                raise InvalidParameterError("region must be centred at the observed statistic")
            axes = region.axes
            transform = np.diag(axes) if axes is not None else np.linalg.cholesky(region.shape)
        self.transform = np.asarray(transform, dtype=float)
        if self.model == NORMAL and law == "canonical":
            xbar, s2 = center
            center = np.array([xbar, xbar ** 2 + (self.n - 1) * s2 / self.n])
        self.center = center
        self.q = center.size

    def region_points(self, m):
        z, w = _unit_ball_rule(self.q, m)
        return self.center + z @ self.transform.T, w

    @property
    def volume(self):
        q = self.q
        return math.pi ** (q / 2) / special.gamma(q / 2 + 1) * abs(np.linalg.det(self.transform))

    # log f(tau | theta) - log f(tau* | theta); theta arrays broadcast against a trailing tau axis
    def log_lik_ratio(self, pts, theta):
        n, c = self.n, self.center
        if self.model == EXPONENTIAL:
            (rate,) = theta
            t = pts[:, 0]
            with np.errstate(divide="ignore", invalid="ignore"):
                out = (n - 1) * np.log(t / c[0]) - rate[..., None] * n * (t - c[0])
            return np.where(t > 0, out, -np.inf)
        mu, lam = theta
        x, s = pts[:, 0], pts[:, 1]
        mu, lam = mu[..., None], lam[..., None]
        if self.law == "canonical":
            return n * lam * (mu * (x - c[0]) - (s - c[1]) / 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (-lam * ((n - 1) * (s - c[1]) + n * ((x - mu) ** 2 - (c[0] - mu) ** 2)) / 2
                   + (n - 3) / 2 * np.log(s / c[1]))
        return np.where(s > 0, out, -np.inf)

    def _beta_n(self, x, s):
        p, n = self.prior, self.n
        kn = p.kappa + n
        spread = n * (s - x ** 2) / 2 if self.law == "canonical" else (n - 1) * s / 2
        return p.beta + spread + p.kappa * n * (x - p.mu0) ** 2 / (2 * kn)

    def log_fT_ratio(self, pts):
        n, c, an = self.n, self.center, self.post.alpha
        if self.model == EXPONENTIAL:
            t = pts[:, 0]
            b = self.prior.beta
            with np.errstate(divide="ignore", invalid="ignore"):
                out = (n - 1) * np.log(t / c[0]) - an * np.log((b + n * t) / (b + n * c[0]))
            return np.where(t > 0, out, -np.inf)
        x, s = pts[:, 0], pts[:, 1]
        b1, b0 = self._beta_n(x, s), self._beta_n(c[0], c[1])
        with np.errstate(divide="ignore", invalid="ignore"):
            out = -an * np.log(b1 / b0)
            if self.law == "exact":
                out = out + (n - 3) / 2 * np.log(s / c[1])
        return np.where((b1 > 0) & (s > 0 if self.law == "exact" else True), out, -np.inf)

    def log_fT_center(self):
        """Exact log density of the statistic at the centre (exact law only)."""
        return log_marginal_stat_density(self.prior, self.stat, law="exact")

    def theta_grid(self, m, tail):
        post = self.post
        lo, hi = stats.gamma.ppf([tail, 1 - tail], post.alpha, scale=1 / post.beta)
        x, w = np.polynomial.legendre.leggauss(m)
        g = (lo + hi) / 2 + (hi - lo) / 2 * x
        wg = w * (hi - lo) / 2 * stats.gamma.pdf(g, post.alpha, scale=1 / post.beta)
        if self.model == EXPONENTIAL:
            return (g,), wg
        h, wh = special.roots_hermitenorm(m)
        wh = wh / math.sqrt(2 * math.pi)
        mu = post.mu0 + h[None, :] / np.sqrt(post.kappa * g[:, None])
        lam = np.broadcast_to(g[:, None], mu.shape)
        return (mu, lam), wg[:, None] * wh[None, :]


def _log_avg_exp(logv, w):
    return special.logsumexp(logv, axis=-1, b=w)


class _Evaluation(NamedTuple):
    theta: tuple
    weights: np.ndarray
    log_r: np.ndarray


def _evaluate(frame, spec):
    pts, w = frame.region_points(spec.region_nodes)
    log_z = float(_log_avg_exp(frame.log_fT_ratio(pts), w))
    theta, weights = frame.theta_grid(spec.theta_nodes, spec.tail_mass)
    log_r = np.empty(weights.shape)
    # one row of the theta grid at a time keeps memory at O(nodes * region nodes)
    for k in range(weights.shape[0]):
        row = tuple(np.atleast_1d(t[k]) for t in theta)
        val = _log_avg_exp(frame.log_lik_ratio(pts, row), w) - log_z
        log_r[k] = np.reshape(val, np.shape(log_r[k]))
    return _Evaluation(theta, weights, log_r)


def _converged(fn, frame, spec, tol, label):
    value = fn(frame, spec)
    if not spec.check:
        return value
    fine = fn(frame, spec.refined())
    scale = np.max(np.abs(fine))
    err = np.max(np.abs(np.asarray(fine) - np.asarray(value)))
    if err > tol * scale and err > 1e-300:
        raise QuadratureError(f"{label}: doubling nodes changed the result by {err / scale:.2e} relative")
    return fine


def _theta_args(model, theta):
    if model == NORMAL:
        if not isinstance(theta, (NormalTheta, tuple)) or len(theta) != 2:
            raise InvalidParameterError("normal model needs theta = (mu, lam)")
        mu, lam = (np.asarray(t, dtype=float) for t in theta)
        mu, lam = np.broadcast_arrays(mu, lam)
        return mu, lam
    rate = np.asarray(theta[0] if isinstance(theta, (RateTheta, tuple)) else theta, dtype=float)
    return (rate,)


def _log_r_at(frame, spec, theta):
    pts, w = frame.region_points(spec.region_nodes)
    log_z = float(_log_avg_exp(frame.log_fT_ratio(pts), w))
    return _log_avg_exp(frame.log_lik_ratio(pts, theta), w) - log_z


def _post_logpdf(frame, theta):
    post = frame.post
    if frame.model == EXPONENTIAL:
        return stats.gamma.logpdf(theta[0], post.alpha, scale=1 / post.beta)
    mu, lam = theta
    return (stats.gamma.logpdf(lam, post.alpha, scale=1 / post.beta)
            + stats.norm.logpdf(mu, post.mu0, 1 / np.sqrt(post.kappa * lam)))


# ------------------------------------------------------------ public ops

def perturbed_density(prior, stat, region: AcceptanceRegion, theta, spec: QuadratureSpec = DEFAULT_SPEC,
                      *, law="exact"):
    """``f_eps(theta | tau*)``, vectorised over ``theta``."""
    frame = _Frame(prior, stat, region, law)
    th = _theta_args(frame.model, theta)
    if np.any(th[-1] <= 0):
        raise InvalidParameterError("theta outside the support")

    def fn(fr, sp):
        return np.exp(_post_logpdf(fr, th) + _log_r_at(fr, sp, th))

    out = _converged(fn, frame, spec, spec.density_rel_tol, "perturbed density")
    return float(out) if np.ndim(out) == 0 else out


def perturbation_ratio(prior, stat, region, theta, spec: QuadratureSpec = DEFAULT_SPEC, *, law="exact"):
    """``r(theta) = f_eps(theta) / f(theta)``."""
    frame = _Frame(prior, stat, region, law)
    th = _theta_args(frame.model, theta)
    out = _converged(lambda fr, sp: np.exp(_log_r_at(fr, sp, th)), frame, spec, spec.density_rel_tol,
                     "perturbation ratio")
    return float(out) if np.ndim(out) == 0 else out


def _kl(frame, spec):
    ev = _evaluate(frame, spec)
    # r - 1 - log r integrates to KL(f || f_eps) because E_f[r] = 1
    d = np.expm1(ev.log_r)
    return float(np.sum(ev.weights * (d - ev.log_r)))


def kl_numeric(prior, stat, region: AcceptanceRegion, spec: QuadratureSpec = DEFAULT_SPEC, *, law="exact"):
    """Relative entropy ``int f log(f / f_eps) dtheta``."""
    frame = _Frame(prior, stat, region, law)
    return _converged(_kl, frame, spec, spec.rel_tol, "relative entropy")


def _observable(model, h):
    if callable(h):
        return h
    table = {
        NORMAL: {"mu": lambda t: t[0], "lam": lambda t: t[1], "inv_lam": lambda t: 1 / t[1],
                 "sigma2": lambda t: 1 / t[1], "mean_mu": lambda t: t[0],
                 "variance_sigma2": lambda t: 1 / t[1], "precision": lambda t: t[1]},
        EXPONENTIAL: {"theta": lambda t: t[0], "rate": lambda t: t[0], "rate_theta": lambda t: t[0]},
    }[model]
    if h not in table:
        raise InvalidParameterError(f"observable {h!r} is not defined for the {model} model")
    return table[h]


def _moment_fn(h, centred):
    def fn(frame, spec):
        ev = _evaluate(frame, spec)
        hv = np.asarray(h(NormalTheta(*ev.theta) if frame.model == NORMAL else RateTheta(*ev.theta)), dtype=float)
        factor = np.expm1(ev.log_r) if centred else np.exp(ev.log_r)
        return float(np.sum(ev.weights * hv * factor))
    return fn


def _check_inverse(frame, h):
    if h in ("inv_lam", "sigma2", "variance_sigma2") and frame.post.alpha <= 1:
        raise MomentUndefinedError("E[1/lam] needs alpha_n > 1")


def perturbed_moment(prior, stat, region: AcceptanceRegion, h, spec: QuadratureSpec = DEFAULT_SPEC,
                     *, law="exact"):
    """``E_{f_eps}[h(theta)]``; ``h`` is a name (``mu``, ``lam``, ``inv_lam``, ``theta``) or a callable."""
    frame = _Frame(prior, stat, region, law)
    _check_inverse(frame, h)
    return _converged(_moment_fn(_observable(frame.model, h), False), frame, spec, spec.rel_tol,
                      "perturbed moment")


def perturbed_bias(prior, stat, region: AcceptanceRegion, h, spec: QuadratureSpec = DEFAULT_SPEC,
                   *, law="exact"):
    """``E_{f_eps}[h] - E_f[h]`` computed as ``E_f[h (r - 1)]`` on one grid."""
    frame = _Frame(prior, stat, region, law)
    _check_inverse(frame, h)
    return _converged(_moment_fn(_observable(frame.model, h), True), frame, spec, spec.rel_tol,
                      "perturbed bias")


def acceptance_probability(prior, stat, region: AcceptanceRegion, spec: QuadratureSpec = DEFAULT_SPEC):
    """``P(T in D)`` under the prior predictive law of the statistic (exact law)."""
    frame = _Frame(prior, stat, region, "exact")

    def fn(fr, sp):
        pts, w = fr.region_points(sp.region_nodes)
        log_avg = float(_log_avg_exp(fr.log_fT_ratio(pts), w))
        return math.exp(fr.log_fT_center() + log_avg) * fr.volume

    p = _converged(fn, frame, spec, spec.rel_tol, "acceptance probability")
    return min(float(p), 1.0)


# ------------------------------------------------------- second-order check

class LemmaCheck(NamedTuple):
    order: float
    linear_term: float
    second_numeric: float
    second_closed: float

    @property
    def second_rel_error(self):
        return abs(self.second_numeric / self.second_closed - 1)


def _second_log_derivatives(frame, theta, i):
    """``d^2 f / f`` in ``tau_i`` at the centre for ``f(tau | theta)`` and ``f_T(tau)``."""
    n, c = frame.n, frame.center
    if frame.model == EXPONENTIAL:
        t = c[0]
        (rate,) = theta
        g1, g2 = (n - 1) / t - n * rate, -(n - 1) / t ** 2
        b = frame.prior.beta + n * t
        an = frame.post.alpha
        f1, f2 = (n - 1) / t - an * n / b, -(n - 1) / t ** 2 + an * n ** 2 / b ** 2
        return g2 + g1 ** 2, f2 + f1 ** 2
    mu, lam = theta
    p = frame.prior
    kn, an = p.kappa + n, frame.post.alpha
    b = frame._beta_n(c[0], c[1])
    x, s = c
    if frame.law == "canonical":
        eta = (mu * lam, -lam / 2)[i]
        g1, g2 = n * eta, 0.0
        db = (-n * x + p.kappa * n * (x - p.mu0) / kn, n / 2)[i]
        d2b = (-n + p.kappa * n / kn, 0.0)[i]
        jac1, jac2 = 0.0, 0.0
    else:
        if i == 0:
            g1, g2 = -n * lam * (x - mu), -n * lam
            db, d2b = p.kappa * n * (x - p.mu0) / kn, p.kappa * n / kn
            jac1, jac2 = 0.0, 0.0
        else:
            g1, g2 = (n - 3) / (2 * s) - lam * (n - 1) / 2, -(n - 3) / (2 * s ** 2)
            db, d2b = (n - 1) / 2, 0.0
            jac1, jac2 = (n - 3) / (2 * s), -(n - 3) / (2 * s ** 2)
    f1 = jac1 - an * db / b
    f2 = jac2 - an * (d2b / b - db ** 2 / b ** 2)
    return g2 + g1 ** 2, f2 + f1 ** 2


def lemma_check(prior, stat, theta, component, delta, spec: QuadratureSpec = DEFAULT_SPEC, *, law="canonical"):
    """Finite-difference study of ``f_eps`` as the ``component``-th tolerance grows from 0.

    Only that tolerance is nonzero.  Returns the observed convergence order of
    ``f_eps - f`` (2 when the first derivative vanishes), the Richardson
    estimate of the linear coefficient relative to the quadratic one at
    ``delta``, and the second-order coefficient ``2(q+2)(f_eps/f - 1)/delta^2``
    (Richardson-extrapolated) next to its closed form
    ``d^2 f(tau, theta)/f(tau, theta) - d^2 f_T/f_T``.
    """
    region = AcceptanceRegion.ball(stat.tau, 1.0)
    frame0 = _Frame(prior, stat, region, law)
    th = tuple(np.atleast_1d(np.asarray(t, dtype=float)) for t in _theta_args(frame0.model, theta))
    q = frame0.q
    if not 0 <= component < q:
        raise InvalidParameterError(f"component {component} out of range for q={q}")

    def rm1(d):
        axes = np.zeros(q)
        axes[component] = d
        fr = _Frame(prior, stat, region, law, transform=np.diag(axes))
        val = lambda f, s: float(np.expm1(_log_r_at(f, s, th))[0])
        return _converged(val, fr, spec, spec.density_rel_tol, "perturbed density")

    r1, r2, r4 = rm1(delta), rm1(delta / 2), rm1(delta / 4)
    order = math.log2(abs(r1 / r2))
    linear = (4 * r2 - r1) / delta
    quad = (r1 - linear * delta) / delta ** 2
    s1 = 2 * (q + 2) * r1 / delta ** 2
    s2 = 2 * (q + 2) * r2 / (delta / 2) ** 2
    s4 = 2 * (q + 2) * r4 / (delta / 4) ** 2
    # two Richardson sweeps in delta^2
    e1, e2 = (4 * s2 - s1) / 3, (4 * s4 - s2) / 3
    extrap = (16 * e2 - e1) / 15
    a, b = _second_log_derivatives(frame0, tuple(t[0] for t in th), component)
    return LemmaCheck(order, abs(linear * delta / (quad * delta ** 2)) if quad else math.inf, extrap, float(a - b))


__all__ = [
    "QuadratureSpec", "perturbed_density", "perturbation_ratio", "kl_numeric", "perturbed_moment",
    "perturbed_bias", "acceptance_probability", "lemma_check", "LemmaCheck", "DEFAULT_SPEC",
]
