"""Rejection ABC: acceptance regions, the accept/reject loop and particle estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy import linalg

from .exceptions import (
    BudgetExhaustedError,
    DimensionMismatchError,
    EmptyRunError,
    InvalidParameterError,
)
from .models import (
    EXPONENTIAL,
    NORMAL,
    NormalTheta,
    RateTheta,
    model_of,
    sample_prior,
    sample_stats,
)

BALL = "ball"
ELLIPSE = "ellipse"
METRIC = "metric"

#: proposals simulated per vectorised batch; part of the determinism contract
BATCH_SIZE = 1 << 16


class AcceptanceRegion:
    """Set ``{tau : (tau - center)^T A^{-1} (tau - center) <= 1}``.

    ``A = eps^2 I`` for a ball, ``diag(eps^2)`` for an ellipse, or any symmetric
    positive-definite matrix.  Diagonal shapes are evaluated through their
    semi-axes, so ``ball(eps)``, ``ellipse([eps]*q)`` and ``metric(eps^2 I)``
    give bit-identical membership.  Points on the boundary are inside.
    """

    def __init__(self, center, geometry, shape):
        center = np.atleast_1d(np.asarray(center, dtype=float))
        if center.ndim != 1 or not np.all(np.isfinite(center)):
            raise InvalidParameterError("center must be a finite vector")
        self.center = center
        self.geometry = geometry
        q = center.size
        self._axes = None
        self._chol = None
        if geometry == BALL:
            eps = float(shape)
            if not eps > 0:
                raise InvalidParameterError(f"radius must be positive, got {eps}")
            self.shape = eps
            self._axes = np.full(q, eps)
        elif geometry == ELLIPSE:
            axes = np.atleast_1d(np.asarray(shape, dtype=float))
            if axes.shape != (q,):
                raise DimensionMismatchError(f"need {q} semi-axes, got {axes.shape}")
            if not np.all(axes > 0):
                raise InvalidParameterError("semi-axes must be positive")
            self.shape = axes
            self._axes = axes
        elif geometry == METRIC:
            a = np.atleast_2d(np.asarray(shape, dtype=float))
            if a.shape != (q, q):
                raise DimensionMismatchError(f"metric must be {q}x{q}, got {a.shape}")
            if not np.allclose(a, a.T, rtol=0, atol=0):
                raise InvalidParameterError("metric must be symmetric")
            try:
                chol = linalg.cholesky(a, lower=True)
            except linalg.LinAlgError as exc:
                raise InvalidParameterError("metric must be positive definite") from exc
            self.shape = a
            if np.count_nonzero(a - np.diag(np.diag(a))) == 0:
                self._axes = np.sqrt(np.diag(a))
            else:
                self._chol = chol
        else:
            raise InvalidParameterError(f"unknown geometry {geometry!r}")

    @classmethod
    def ball(cls, center, eps):
        return cls(center, BALL, eps)

    @classmethod
    def ellipse(cls, center, axes):
        return cls(center, ELLIPSE, axes)

    @classmethod
    def metric(cls, center, matrix):
        return cls(center, METRIC, matrix)

    @property
    def q(self):
        return self.center.size

    @property
    def axes(self):
        """Semi-axes for diagonal shapes, ``None`` otherwise."""
        return None if self._axes is None else self._axes.copy()

    def distance2(self, tau):
        tau = np.asarray(tau, dtype=float)
        if tau.shape[-1] != self.q:
            raise DimensionMismatchError(f"expected points of dimension {self.q}, got {tau.shape[-1]}")
        d = tau - self.center
        if self._axes is not None:
            z = d / self._axes
        else:
            flat = d.reshape(-1, self.q).T
            z = linalg.solve_triangular(self._chol, flat, lower=True).T.reshape(d.shape)
        return np.sum(z * z, axis=-1)

    def contains(self, tau):
        return contains(self, tau)

    def __repr__(self):
        return f"AcceptanceRegion({self.center.tolist()!r}, {self.geometry!r}, {np.asarray(self.shape).tolist()!r})"


def contains(region: AcceptanceRegion, tau):
    """Membership test; vectorised over leading axes of ``tau``."""
    out = region.distance2(tau) <= 1.0
    return bool(out) if np.ndim(out) == 0 else out


@dataclass(eq=False)
class AbcRun:
    """Result of ``run_abc``.

    ``rejections[k]`` counts proposals rejected since the previous acceptance.
    Incomplete runs keep the trailing rejected proposals in ``trailing_rejections``.
    """

    model: str
    particles: np.ndarray
    rejections: np.ndarray
    total_proposals: int
    seed: Optional[int]
    region: AcceptanceRegion
    n: int
    complete: bool = True
    trailing_rejections: int = 0
    requested: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def K(self):
        return len(self.rejections)

    @property
    def R_hat(self):
        """Mean number of rejections per accepted particle."""
        if self.K == 0:
            raise EmptyRunError("run has no accepted particles")
        return (self.total_proposals - self.K - self.trailing_rejections) / self.K

    @property
    def acceptance_rate(self):
        return self.K / self.total_proposals if self.total_proposals else float("nan")

    @property
    def theta(self):
        if self.model == NORMAL:
            return NormalTheta(self.particles[:, 0], self.particles[:, 1])
        return RateTheta(self.particles[:, 0])


def _seed_of(rng):
    if isinstance(rng, (int, np.integer)):
        return int(rng)
    if isinstance(rng, np.random.SeedSequence) and isinstance(rng.entropy, int):
        return int(rng.entropy)
    return None


def run_abc(model, prior, n, region: AcceptanceRegion, K, rng, max_proposals=10 ** 9,
            batch_size=BATCH_SIZE) -> AbcRun:
    """Draw ``K`` particles by rejection.

    Proposals come from the prior; each is accepted when its simulated
    statistic falls in ``region``.  Proposals are generated in batches of
    ``batch_size`` from a single stream, so a run is a deterministic function
    of the seed and arguments.  Proposals after the ``K``-th acceptance are
    discarded and not counted.  If ``max_proposals`` runs out first a
    ``BudgetExhaustedError`` carrying the partial run is raised.
    """
    if model is None:
        model = model_of(prior)
    if model not in (NORMAL, EXPONENTIAL) or model != model_of(prior):
        raise InvalidParameterError(f"model {model!r} does not match prior {type(prior).__name__}")
    K = int(K)
    if K < 1:
        raise InvalidParameterError("K must be at least 1")
    if max_proposals < K:
        raise InvalidParameterError("max_proposals must be at least K")
    q = 2 if model == NORMAL else 1
    if region.q != q:
        raise DimensionMismatchError(f"{model} statistics have dimension {q}, region has {region.q}")
    seed = _seed_of(rng)
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)

    particles = np.empty((K, q))
    rejections = np.empty(K, dtype=np.int64)
    got = 0
    used = 0
    pending = 0
    while got < K and used < max_proposals:
        size = int(min(batch_size, max_proposals - used))
        theta = sample_prior(prior, gen, size)
        tau = sample_stats(theta, n, gen)
        hit = np.flatnonzero(contains(region, tau))
        take = hit[: K - got]
        if take.size:
            gaps = np.diff(take, prepend=-1) - 1
            gaps[0] += pending
            cols = np.column_stack(theta)[take]
            particles[got:got + take.size] = cols
            rejections[got:got + take.size] = gaps
            got += take.size
            if got == K:
                used += int(take[-1]) + 1
                pending = 0
                break
            pending = size - int(take[-1]) - 1
        else:
            pending += size
        used += size
    run = AbcRun(model, particles[:got], rejections[:got], used, seed, region, int(n),
                 complete=got == K, trailing_rejections=0 if got == K else pending, requested=K)
    if not run.complete:
        raise BudgetExhaustedError(f"accepted {got} of {K} particles within {max_proposals} proposals", run)
    return run


class Estimate(NamedTuple):
    estimate: float
    std_error: float
    sd: float


OBSERVABLES = {
    "mean_mu": lambda th: th.mu,
    "variance_sigma2": lambda th: 1.0 / th.lam,
    "precision": lambda th: th.lam,
    "rate_theta": lambda th: th.rate,
}


def estimate(run: AbcRun, observable="mean_mu") -> Estimate:
    """Particle average of ``h``, its standard error and the particle standard deviation.

    ``observable`` is one of ``mean_mu``, ``variance_sigma2``, ``precision``,
    ``rate_theta`` or a callable taking the particle ``theta`` tuple.
    """
    if run.K == 0:
        raise EmptyRunError("run has no accepted particles")
    h: Callable = observable if callable(observable) else OBSERVABLES.get(observable)
    if h is None:
        raise InvalidParameterError(f"unknown observable {observable!r}")
    try:
        values = np.broadcast_to(np.asarray(h(run.theta), dtype=float), (run.K,))
    except AttributeError as exc:
        raise InvalidParameterError(f"observable {observable!r} does not apply to {run.model}") from exc
    mean = float(values.mean())
    if run.K < 2:
        return Estimate(mean, math.nan, math.nan)
    sd = float(values.std(ddof=1))
    return Estimate(mean, sd / math.sqrt(run.K), sd)
