"""Acceptance criteria 1-10, one test (or a small group) per criterion.

Each test records its verdict through ``conftest.record`` so the terminal
summary prints one line per criterion.  Set ``RELABC_LONG=1`` to add the
slow (0.05, 1000) cell to the Monte Carlo trend check.
"""

import math
import time

import numpy as np
import pytest

from conftest import LONG, record
from relabc import (
    AcceptanceRegion,
    GammaParams,
    NormalGammaParams,
    ObservedStat,
    bias_normal_mean,
    bias_normal_variance,
    calibrate_ball,
    calibrate_ellipse_closed,
    calibrate_ellipse_numeric,
    estimate,
    re_form_exponential,
    re_form_normal,
    run_abc,
    update,
)
from relabc.expansion import ball_epsilon_for, weight_mean
from relabc.harness import ExperimentConfig, run_cell, verify_reference_rows
from relabc.harness.config import Cell
from relabc.models import log_likelihood, log_posterior_density, natural_moment_table, sample_prior
from relabc.oracle import acceptance_probability, kl_numeric, lemma_check, perturbed_bias, perturbed_moment

PRIOR = NormalGammaParams(0.0, 1.0, 1.0, 1.0)


def _report_rows(report, table):
    bad = [c for c in report.rows(table) if not c.excluded and not c.passed]
    worst = max((abs(c.rel_dev) for c in report.rows(table) if not c.excluded), default=0.0)
    return bad, worst


# ---------------------------------------------------------------- 1 - 3

def test_criterion_1_ball_tolerances():
    t0 = time.perf_counter()
    report = verify_reference_rows(legacy=True)
    elapsed = time.perf_counter() - t0
    bad, worst = _report_rows(report, "table1")
    skipped = [(c.tol, c.n) for c in report.rows("table1") if c.excluded]
    ok = not bad and elapsed < 1.0
    record(1, ok, f"worst |dev| {worst:.3f} (limit 0.05), excluded {skipped}, {elapsed:.3f}s")
    assert not bad, [(c.tol, c.n, round(c.rel_dev, 3)) for c in bad]
    assert elapsed < 1.0


def test_criterion_2_ellipse_tolerances():
    t0 = time.perf_counter()
    report = verify_reference_rows(legacy=True)
    elapsed = time.perf_counter() - t0
    bad, worst = _report_rows(report, "table2")
    variants = sorted({(c.tol, c.n) for c in report.rows("table2") if c.note})
    record(2, not bad and elapsed < 1.0,
           f"worst |dev| {worst:.3f} (limit 0.05), alternative inputs used for {variants}, {elapsed:.3f}s")
    assert not bad, [(c.tol, c.n, c.quantity, round(c.rel_dev, 3)) for c in bad]
    assert elapsed < 1.0


def test_criterion_3_rejection_ratio_from_printed_tolerances():
    t0 = time.perf_counter()
    report = verify_reference_rows(legacy=True)
    elapsed = time.perf_counter() - t0
    bad, worst = _report_rows(report, "table3")
    record(3, not bad and elapsed < 1.0,
           f"{16 - len(bad)}/16 rows within 0.02, worst |dev| {worst:.3f}, {elapsed:.3f}s")
    assert not bad, [(c.tol, c.n, round(c.computed, 4), c.reference) for c in bad]


# ---------------------------------------------------------------- 4 - 5

def _expansion_vs_oracle(prior, stat, form, target=1e-4, law="canonical"):
    eps = ball_epsilon_for(form, target)
    ratios = []
    for e in (eps, eps / 2):
        region = AcceptanceRegion.ball(stat.tau, e)
        ratios.append(kl_numeric(prior, stat, region, law=law) / form(e))
    return eps, ratios


@pytest.mark.parametrize("n", [20, 50])
def test_criterion_4_normal_expansion_matches_quadrature(n):
    stat = ObservedStat.normal(0.0, 1.0, n)
    form = re_form_normal(update(PRIOR, stat), n)
    eps, (r1, r2) = _expansion_vs_oracle(PRIOR, stat, form)
    ok = 0.7 <= r1 <= 1.3 and abs(r2 - 1) < abs(r1 - 1)
    record(4, ok, f"n={n}: KL/expansion {r1:.4f} -> {r2:.4f} at eps {eps:.4g}, eps/2")
    assert 0.7 <= r1 <= 1.3
    assert abs(r2 - 1) < abs(r1 - 1)


def test_criterion_5_exponential_expansion_matches_quadrature():
    prior = GammaParams(1.0, 1.0)
    stat = ObservedStat.exponential(1.0, 50)
    form = re_form_exponential(update(prior, stat), 50, 1.0)
    eps, (r1, r2) = _expansion_vs_oracle(prior, stat, form)
    ok = 0.7 <= r1 <= 1.3 and abs(r2 - 1) < abs(r1 - 1)
    record(5, ok, f"KL/expansion {r1:.4f} -> {r2:.4f} at eps {eps:.4g}, eps/2")
    assert 0.7 <= r1 <= 1.3
    assert abs(r2 - 1) < abs(r1 - 1)


# ---------------------------------------------------------------- 6

@pytest.mark.parametrize("n,tau", [(20, (0.5, 1.2)), (50, (0.3, 0.9))])
def test_criterion_6_bias_matches_prediction(n, tau):
    stat = ObservedStat.normal(*tau, n)
    post = update(PRIOR, stat)
    eps = calibrate_ball(re_form_normal(post, n), 1e-4).epsilon[0]
    out = {}
    for name, predict in (("mu", bias_normal_mean), ("sigma2", bias_normal_variance)):
        b = [perturbed_bias(PRIOR, stat, AcceptanceRegion.ball(tau, e), name, law="canonical") for e in (eps, eps / 2)]
        out[name] = (b[0] / predict(post, n, eps).predicted_bias, b[0] / b[1])
    ok = all(abs(r - 1) <= 0.2 and abs(s / 4 - 1) <= 0.1 for r, s in out.values())
    record(6, ok, f"n={n}: " + ", ".join(f"{k} ratio {r:.4f} scaling {s:.3f}" for k, (r, s) in out.items()))
    for r, s in out.values():
        assert abs(r - 1) <= 0.2
        assert abs(s / 4 - 1) <= 0.1


# ---------------------------------------------------------------- 7

def test_criterion_7_closed_and_numeric_calibration_agree():
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        prior = NormalGammaParams(rng.normal(0, 1), rng.uniform(0.2, 5), rng.uniform(0.5, 5), rng.uniform(0.2, 5))
        n = int(rng.integers(5, 2000))
        stat = ObservedStat.normal(rng.normal(0, 1), rng.uniform(0.2, 3), n)
        form = re_form_normal(update(prior, stat), n)
        tol = 10 ** rng.uniform(-3, 0.5)
        closed = calibrate_ellipse_closed(form, tol).epsilon
        numeric = calibrate_ellipse_numeric(form, tol).epsilon
        worst = max(worst, float(np.max(np.abs(numeric / closed - 1))))
    elapsed = time.perf_counter() - t0
    record(7, worst < 1e-6, f"worst relative gap {worst:.2e} over 100 posteriors, {elapsed:.2f}s")
    assert worst < 1e-6


# ---------------------------------------------------------------- 8

TREND_CELLS = [(0.25, 300), (0.25, 1000), (1.0, 300), (1.0, 1000)] + ([(0.05, 1000)] if LONG else [])


@pytest.mark.parametrize("master_seed", [11, 22, 33])
def test_criterion_8_ellipse_cheaper_than_ball(master_seed):
    tols = sorted({t for t, _ in TREND_CELLS})
    ns = sorted({n for _, n in TREND_CELLS})
    config = ExperimentConfig(K=200, master_seed=master_seed, tols=tuple(tols), ns=tuple(ns))
    ratios = {}
    for tol, n in TREND_CELLS:
        rec = run_cell(config, Cell(tols.index(tol), ns.index(n), tol, n))
        assert rec.complete
        ratios[(tol, n)] = rec.R_ratio_empirical
    ok = all(r < 1 for r in ratios.values())
    record(8, ok, f"seed {master_seed}: max R_E/R_B {max(ratios.values()):.3f}")
    assert ok, ratios


# ---------------------------------------------------------------- 9

def test_criterion_9_weight_mean_vanishes():
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(50):
        post = NormalGammaParams(rng.normal(0, 2), rng.uniform(1, 500), rng.uniform(1, 500), rng.uniform(0.5, 500))
        table = natural_moment_table(post, order=2)
        scale = max(abs(v) for v in table.values())
        for i in (0, 1):
            g = rng.normal(0, 3)
            worst = max(worst, abs(weight_mean(post, i, logR_grad=g, table=table)) / scale)
        gpost = GammaParams(rng.uniform(1, 500), rng.uniform(0.5, 500))
        gtab = natural_moment_table(gpost, order=2)
        worst = max(worst, abs(weight_mean(gpost, 0, logR_grad=rng.normal(0, 3), table=gtab))
                    / max(abs(v) for v in gtab.values()))
    record(9, worst < 1e-12, f"max |E w_i| {worst:.1e}")
    assert worst < 1e-12


def test_criterion_9_region_equivalence():
    rng = np.random.default_rng(19)
    center = np.array([0.1, 1.3])
    tau = center + rng.normal(0, 0.05, size=(20000, 2))
    eps = 0.04
    a = AcceptanceRegion.ball(center, eps).contains(tau)
    b = AcceptanceRegion.ellipse(center, [eps, eps]).contains(tau)
    c = AcceptanceRegion.metric(center, eps ** 2 * np.eye(2)).contains(tau)
    ok = bool(np.array_equal(a, b) and np.array_equal(a, c))
    record(9, ok, "ball/ellipse/metric membership identical")
    assert ok


def test_criterion_9_ellipse_volume_dominates_ball():
    rng = np.random.default_rng(29)
    ok = True
    for _ in range(200):
        prior = NormalGammaParams(rng.normal(), rng.uniform(0.2, 4), rng.uniform(0.5, 4), rng.uniform(0.2, 4))
        n = int(rng.integers(3, 1500))
        stat = ObservedStat.normal(rng.normal(), rng.uniform(0.2, 3), n)
        form = re_form_normal(update(prior, stat), n)
        tol = 10 ** rng.uniform(-3, 0.5)
        ok &= calibrate_ellipse_closed(form, tol).volume >= calibrate_ball(form, tol).volume * (1 - 1e-12)
    record(9, ok, "ellipse volume >= ball volume (200 draws)")
    assert ok


def test_criterion_9_conjugacy_log_ratio_constant():
    rng = np.random.default_rng(39)
    spread = 0.0
    for _ in range(20):
        prior = NormalGammaParams(rng.normal(), rng.uniform(0.2, 4), rng.uniform(0.5, 4), rng.uniform(0.2, 4))
        stat = ObservedStat.normal(rng.normal(), rng.uniform(0.2, 3), int(rng.integers(2, 500)))
        post = update(prior, stat)
        theta = sample_prior(post, rng, 200)
        d = log_posterior_density(post, theta) - log_likelihood(stat, theta) - log_posterior_density(prior, theta)
        spread = max(spread, float(np.ptp(d)))
    record(9, spread < 1e-10, f"log-ratio spread {spread:.1e}")
    assert spread < 1e-10


def test_criterion_9_particle_moments_match_quadrature():
    n, tau = 20, (0.5, 1.2)
    stat = ObservedStat.normal(*tau, n)
    region = AcceptanceRegion.ellipse(tau, (0.25, 0.4))
    p = acceptance_probability(PRIOR, stat, region)
    run = run_abc("normal", PRIOR, n, region, 1000, 2024)
    zs = []
    for obs, h in (("mean_mu", "mu"), ("variance_sigma2", "sigma2")):
        est = estimate(run, obs)
        zs.append((est.estimate - perturbed_moment(PRIOR, stat, region, h)) / est.std_error)
    # rejections before each acceptance are geometric with success probability p
    z_rej = (run.R_hat - (1 - p) / p) / (math.sqrt(1 - p) / p / math.sqrt(run.K))
    ok = all(abs(z) < 4 for z in zs) and abs(z_rej) < 4
    record(9, ok, f"particle z-scores {zs[0]:+.2f}, {zs[1]:+.2f}; rejection z {z_rej:+.2f}")
    assert all(abs(z) < 4 for z in zs)
    assert abs(z_rej) < 4


# ---------------------------------------------------------------- 10

@pytest.mark.parametrize("component", [0, 1])
def test_criterion_10_second_order_density_expansion(component):
    stat = ObservedStat.normal(0.5, 1.2, 20)
    t0 = time.perf_counter()
    worst_err, worst_order = 0.0, 0.0
    for theta in [(0.4, 0.9), (0.7, 0.6), (0.2, 1.4)]:
        chk = lemma_check(PRIOR, stat, theta, component, 0.02)
        worst_err = max(worst_err, chk.second_rel_error)
        worst_order = max(worst_order, abs(chk.order - 2))
    elapsed = time.perf_counter() - t0
    ok = worst_err < 0.05 and worst_order < 0.1
    record(10, ok, f"component {component}: second-derivative error {worst_err:.1e}, "
                   f"|order-2| {worst_order:.3f}, {elapsed:.2f}s")
    assert worst_err < 0.05
    assert worst_order < 0.1
