"""Estimator-style wrappers around calibration and rejection sampling."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .calibrate import calibrate_ball, calibrate_ellipse_closed, calibrate_ellipse_numeric
from .exceptions import InvalidParameterError, InvalidStatisticError
from .expansion import form_for
from .models import EXPONENTIAL, NORMAL, GammaParams, NormalGammaParams, ObservedStat, update
from .sampler import AcceptanceRegion, estimate, run_abc


def _default_prior(model):
    return NormalGammaParams(0.0, 1.0, 1.0, 1.0) if model == NORMAL else GammaParams(1.0, 1.0)


def sufficient_statistic(X, model=NORMAL):
    """``(xbar, s2)`` with ``s2`` the unbiased sample variance, or ``(xbar,)`` for the rate model."""
    x = check_array(X, ensure_2d=False, dtype=np.float64).reshape(-1)
    if model == NORMAL:
        if x.size < 2:
            raise InvalidStatisticError("normal model needs at least two observations")
        return ObservedStat.normal(x.mean(), x.var(ddof=1), x.size)
    if model != EXPONENTIAL:
        raise InvalidParameterError(f"unknown model {model!r}")
    if np.any(x <= 0):
        raise InvalidStatisticError("exponential observations must be positive")
    return ObservedStat.exponential(x.mean(), x.size)


class EntropyCalibrator(BaseEstimator):
    """Choose the acceptance region for one data set.

    Parameters
    ----------
    model : {"normal", "exponential_rate"}
    prior : NormalGammaParams or GammaParams, optional
        Defaults to ``(0, 1, 1, 1)`` or ``(1, 1)``.
    tol : float
        Ceiling on the leading-order relative entropy.
    geometry : {"ball", "ellipse"}
    legacy : bool
        Use the legacy normal-model coefficient.

    Attributes
    ----------
    stat_, posterior_, form_, calibration_, epsilon_
    """

    def __init__(self, model=NORMAL, prior=None, tol=0.25, geometry="ellipse", legacy=False):
        self.model = model
        self.prior = prior
        self.tol = tol
        self.geometry = geometry
        self.legacy = legacy

    def _prior(self):
        prior = _default_prior(self.model) if self.prior is None else self.prior
        want = NormalGammaParams if self.model == NORMAL else GammaParams
        if not isinstance(prior, want):
            raise InvalidParameterError(f"{self.model} model needs a {want.__name__} prior")
        return prior

    def fit(self, X, y=None):
        if self.geometry not in ("ball", "ellipse"):
            raise InvalidParameterError(f"geometry must be 'ball' or 'ellipse', got {self.geometry!r}")
        self.prior_ = self._prior()
        self.stat_ = sufficient_statistic(X, self.model)
        self.posterior_ = update(self.prior_, self.stat_)
        self.form_ = form_for(self.posterior_, self.stat_.n, self.stat_.tau, legacy=self.legacy)
        if self.geometry == "ball":
            self.calibration_ = calibrate_ball(self.form_, self.tol)
        elif self.form_.q == 2:
            self.calibration_ = calibrate_ellipse_closed(self.form_, self.tol)
        else:
            self.calibration_ = calibrate_ellipse_numeric(self.form_, self.tol)
        self.epsilon_ = np.asarray(self.calibration_.epsilon)
        return self

    def region(self):
        check_is_fitted(self, "epsilon_")
        if self.geometry == "ball":
            return AcceptanceRegion.ball(self.stat_.tau, float(self.epsilon_[0]))
        return AcceptanceRegion.ellipse(self.stat_.tau, self.epsilon_)


class RejectionABC(EntropyCalibrator):
    """Rejection ABC with an entropy-calibrated acceptance region.

    ``fit`` calibrates the region on the data, then draws ``n_particles``
    accepted parameters from the prior.  The particles live in
    ``particles_`` (columns ``mu, lam`` or ``rate``) and the raw run in
    ``run_``.

    >>> import numpy as np
    >>> x = np.random.default_rng(0).normal(size=100)
    >>> abc = RejectionABC(tol=1.0, n_particles=50, random_state=1).fit(x)
    >>> abc.particles_.shape
    (50, 2)
    """

    def __init__(self, model=NORMAL, prior=None, tol=0.25, geometry="ellipse", legacy=False,
                 n_particles=1000, max_proposals=10 ** 9, random_state=None):
        super().__init__(model=model, prior=prior, tol=tol, geometry=geometry, legacy=legacy)
        self.n_particles = n_particles
        self.max_proposals = max_proposals
        self.random_state = random_state

    def fit(self, X, y=None):
        super().fit(X)
        self.region_ = self.region()
        self.run_ = run_abc(self.model, self.prior_, self.stat_.n, self.region_, self.n_particles,
                            self.random_state, self.max_proposals)
        self.particles_ = self.run_.particles
        self.R_hat_ = self.run_.R_hat
        return self

    def estimate(self, observable=None):
        """Particle mean, its standard error and the particle sd for ``observable``."""
        check_is_fitted(self, "run_")
        if observable is None:
            observable = "mean_mu" if self.model == NORMAL else "rate_theta"
        return estimate(self.run_, observable)

    def sample(self, size=None, random_state=None):
        """Resample accepted particles with replacement."""
        check_is_fitted(self, "run_")
        rng = np.random.default_rng(random_state)
        idx = rng.integers(0, len(self.particles_), size=size if size is not None else len(self.particles_))
        return self.particles_[idx]
