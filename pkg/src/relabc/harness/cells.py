"""One cell of the simulation study: data, calibration, two ABC runs, summaries."""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..calibrate import calibrate_ball, calibrate_ellipse_closed, calibrate_ellipse_numeric
from ..diagnostics import q_weights_exponential, q_weights_normal, rejection_ratio_generic
from ..exceptions import BudgetExhaustedError
from ..expansion import form_for
from ..models import NORMAL, sample_stat, update
from ..sampler import AcceptanceRegion, estimate, run_abc
from .config import Cell, ExperimentConfig

SEED_TAGS = {"data": 0, "ball": 1, "ellipse": 2}


def derive_seed(master_seed, tol_index, n_index, tag):
    """64-bit seed for one stream of one cell.

    ``SeedSequence(master_seed, spawn_key=(tol_index, n_index, tag_code))``
    hashes the tuple, so streams are independent and do not depend on the
    order or process in which cells run.
    """
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(tol_index), int(n_index), SEED_TAGS[tag]))
    return int(ss.generate_state(1, np.uint64)[0])


def observables_for(model):
    return ("mean_mu", "variance_sigma2") if model == NORMAL else ("rate_theta",)


@dataclass
class CellRecord:
    tol: float
    n: int
    tau_star: tuple
    epsilon: float
    epsilon_pair: tuple
    estimates: dict
    R_hat: dict
    U_tilde: float
    R_ratio_empirical: float
    seeds: dict
    wall_time: float
    complete: bool = True
    proposals: dict = field(default_factory=dict)
    particles: dict = field(default_factory=dict)

    def to_dict(self):
        out = asdict(self)
        out["estimates"] = {g: {k: list(v) for k, v in d.items()} for g, d in self.estimates.items()}
        return out


def run_cell(config: ExperimentConfig, cell: Cell) -> CellRecord:
    """Draw ``tau*`` from the true parameter, calibrate both regions at ``tol``, run ABC on each."""
    start = time.perf_counter()
    seeds = {tag: derive_seed(config.master_seed, cell.tol_index, cell.n_index, tag) for tag in SEED_TAGS}
    stat = sample_stat(config.true_theta, cell.n, seeds["data"])
    post = update(config.prior, stat)
    form = form_for(post, cell.n, stat.tau, legacy=config.legacy_coefficients)
    ball = calibrate_ball(form, cell.tol)
    if form.q == 2:
        ellipse = calibrate_ellipse_closed(form, cell.tol)
    else:
        ellipse = calibrate_ellipse_numeric(form, cell.tol)
    regions = {
        "ball": AcceptanceRegion.ball(stat.tau, ball.epsilon[0]),
        "ellipse": AcceptanceRegion.ellipse(stat.tau, ellipse.epsilon),
    }
    estimates, r_hat, proposals, accepted = {}, {}, {}, {}
    complete = True
    for geom in config.geometry:
        try:
            run = run_abc(config.model, config.prior, cell.n, regions[geom], config.K, seeds[geom],
                          config.max_proposals)
        except BudgetExhaustedError as exc:
            run = exc.run
            complete = False
        proposals[geom] = run.total_proposals
        accepted[geom] = run.K
        if run.K:
            r_hat[geom] = run.R_hat
            estimates[geom] = {obs: tuple(estimate(run, obs)) for obs in observables_for(config.model)}
        else:
            r_hat[geom] = float(run.total_proposals)
            estimates[geom] = {}
    if config.model == NORMAL:
        qw = q_weights_normal(post)
    else:
        qw = q_weights_exponential(post, cell.n, stat.tau[0])
    u_tilde = rejection_ratio_generic(qw, cell.n, ball.epsilon[0], ellipse.epsilon)
    ratio = r_hat["ellipse"] / r_hat["ball"] if {"ball", "ellipse"} <= set(r_hat) and r_hat["ball"] else math.nan
    return CellRecord(cell.tol, cell.n, stat.tau, float(ball.epsilon[0]), tuple(float(e) for e in ellipse.epsilon),
                      estimates, r_hat, u_tilde, ratio, seeds, time.perf_counter() - start, complete,
                      proposals, accepted)
