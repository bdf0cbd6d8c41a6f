"""Tolerance calibration: largest acceptance region whose leading-order entropy stays below ``tol``.

All solvers work in ``u = eps**2``, where the constraint is a quadratic form
and the log-volume ``sum(log u)/2`` is separable.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .exceptions import DegenerateFormError, DimensionMismatchError, InvalidParameterError, NonConvergenceError
from .expansion import REQuadraticForm

log = logging.getLogger(__name__)

CLOSED_FORM = "closed_form"
NUMERIC = "numeric"


def unit_ball_volume(q):
    return math.pi ** (q / 2) / special.gamma(q / 2 + 1)


def region_volume(eps):
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    return float(unit_ball_volume(eps.size) * np.prod(eps))


@dataclass(frozen=True, eq=False)
class CalibrationResult:
    epsilon: np.ndarray
    achieved_re: float
    volume: float
    method: str
    outside_validity: bool = False
    iterations: int = 0
    multiplier: float = float("nan")

    @property
    def q(self):
        return self.epsilon.size


def _result(form, eps, method, **kw):
    eps = np.asarray(eps, dtype=float)
    eps.setflags(write=False)
    return CalibrationResult(eps, form(eps), region_volume(eps), method,
                             form.outside_validity(eps), **kw)


def _check_tol(tol):
    tol = float(tol)
    if not (tol >= 0 and math.isfinite(tol)):
        raise InvalidParameterError(f"tolerance must be a nonnegative finite number, got {tol}")
    return tol


def calibrate_ball(form: REQuadraticForm, tol: float) -> CalibrationResult:
    """Common tolerance ``eps = (tol / C)^(1/4)`` with ``C`` the total coefficient."""
    tol = _check_tol(tol)
    c = form.total
    if not c > 0:
        raise DegenerateFormError(f"total coefficient must be positive, got {c}")
    eps = np.full(form.q, (tol / c) ** 0.25)
    return _result(form, eps, CLOSED_FORM)


def calibrate_ellipse_closed(form: REQuadraticForm, tol: float) -> CalibrationResult:
    """Exact maximiser for ``q = 2``.

    Stationarity of ``log u1 + log u2`` on ``a u1^2 + b u2^2 + c u1 u2 = tol``
    gives ``a u1^2 = b u2^2``, so ``u1/u2 = sqrt(b/a)`` and
    ``u2 = sqrt(tol / (2b + c sqrt(b/a)))``.
    """
    if form.q != 2:
        raise DimensionMismatchError(f"closed form needs q = 2, got q = {form.q}")
    tol = _check_tol(tol)
    a, b = form.diag
    c = form.cross[0, 1]
    if not (a > 0 and b > 0):
        raise DegenerateFormError(f"diagonal coefficients must be positive, got {a}, {b}")
    if c <= -2 * math.sqrt(a * b):
        raise DegenerateFormError(f"form is not positive on the orthant: cross coefficient {c}")
    r = math.sqrt(b / a)
    u2 = math.sqrt(tol / (2 * b + c * r))
    u1 = r * u2
    return _result(form, np.sqrt([u1, u2]), CLOSED_FORM)


def calibrate_ellipse_numeric(form: REQuadraticForm, tol: float, *, x0=None, max_outer=200,
                              max_inner=100, feas_tol=1e-10, obj_tol=1e-10, penalty=10.0) -> CalibrationResult:
    """Augmented-Lagrangian maximisation of ``prod(eps)`` for any ``q``.

    The problem is solved in ``x = log u`` with the constraint normalised to
    ``c(x) = form(u)/tol - 1``.  Because the volume grows in every ``u_i`` the
    inequality is active at any maximiser, so it is treated as an equality.
    Inner problems use damped Newton steps; the multiplier takes the usual
    first-order update and the penalty grows tenfold when the violation fails
    to shrink by a quarter.  Iteration starts from the ball solution unless
    ``x0`` (tolerances) is given.
    """
    tol = _check_tol(tol)
    q = form.q
    if tol == 0:
        return _result(form, np.zeros(q), NUMERIC)
    if q == 1:
        out = calibrate_ball(form, tol)
        return CalibrationResult(out.epsilon, out.achieved_re, out.volume, NUMERIC, out.outside_validity)

    m = form.matrix / tol
    if x0 is None:
        x = np.full(q, 2 * math.log(calibrate_ball(form, tol).epsilon[0]))
    else:
        x0 = np.asarray(x0, dtype=float)
        if x0.shape != (q,) or np.any(x0 <= 0):
            raise InvalidParameterError("x0 must hold q positive tolerances")
        x = 2 * np.log(x0)

    def constraint(x):
        u = np.exp(x)
        mu = m @ u
        c = 0.5 * u @ mu - 1.0
        grad = u * mu
        hess = np.diag(grad) + np.outer(u, u) * m
        return c, grad, hess

    def lagrangian(x, lam, rho):
        c, _, _ = constraint(x)
        return -0.5 * x.sum() + lam * c + 0.5 * rho * c * c

    # least-squares multiplier estimate at the starting point
    gc0 = constraint(x)[1]
    lam, rho = 0.5 * gc0.sum() / (gc0 @ gc0), penalty
    obj = -0.5 * x.sum()
    c_prev = abs(constraint(x)[0])
    for outer in range(1, max_outer + 1):
        for _ in range(max_inner):
            c, gc, hc = constraint(x)
            w = lam + rho * c
            grad = -0.5 + w * gc
            hess = w * hc + rho * np.outer(gc, gc)
            try:
                step = -np.linalg.solve(hess, grad)
                if grad @ step >= 0:
                    raise np.linalg.LinAlgError
            except np.linalg.LinAlgError:
                shift = abs(np.linalg.eigvalsh(hess).min()) + 1e-8
                step = -np.linalg.solve(hess + shift * np.eye(q), grad)
            big = np.max(np.abs(step))
            if big > 1.0:
                step /= big
            f0, t = lagrangian(x, lam, rho), 1.0
            while t > 1e-12 and lagrangian(x + t * step, lam, rho) > f0 + 1e-4 * t * (grad @ step):
                t *= 0.5
            x = x + t * step
            if np.max(np.abs(t * step)) < 1e-14 or np.linalg.norm(grad) < 1e-13:
                break
        c = constraint(x)[0]
        lam += rho * c
        new_obj = -0.5 * x.sum()
        done = abs(c) < feas_tol and abs(new_obj - obj) <= obj_tol * max(1.0, abs(new_obj))
        obj = new_obj
        if done:
            eps = np.exp(x / 2)
            # the constraint holds to feas_tol; rescale so the result never overshoots tol
            if form(eps) > tol:
                eps = eps * (tol / form(eps)) ** 0.25
            log.debug("augmented Lagrangian converged in %d outer iterations, multiplier %.6g", outer, lam)
            return _result(form, eps, NUMERIC, iterations=outer, multiplier=lam)
        if abs(c) > 0.25 * c_prev:
            rho *= 10.0
        c_prev = abs(c)
    raise NonConvergenceError(f"no convergence after {max_outer} outer iterations (violation {c:.3g})",
                              iterations=max_outer, last=np.exp(x / 2))


def calibrate(form: REQuadraticForm, tol: float, geometry: str = "ball") -> CalibrationResult:
    """Dispatch on geometry: ``"ball"`` or ``"ellipse"`` (closed form when ``q = 2``)."""
    if geometry == "ball":
        return calibrate_ball(form, tol)
    if geometry == "ellipse":
        if form.q == 2:
            return calibrate_ellipse_closed(form, tol)
        return calibrate_ellipse_numeric(form, tol)
    raise InvalidParameterError(f"unknown geometry {geometry!r}")
