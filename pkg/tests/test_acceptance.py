"""Acceptance criteria 1-11, each at its stated tolerance.

Every test records one PASS/FAIL line; the lines are repeated in the
terminal summary under "acceptance criteria".
"""

import time

import numpy as np
import pytest

from conftest import CONFIGS, random_gaussian_model, record_acceptance
from oracles import dense_posterior
from ssmsmooth.config import load_config
from ssmsmooth.datasets import inject_jumps, simulate_piecewise_trend, simulate_seasonal
from ssmsmooth.estimate import default_params, fit
from ssmsmooth.gsum import gsum_smooth
from ssmsmooth.kalman import kalman_filter, log_likelihood, smooth
from ssmsmooth.model import InitialState, NoiseSpec, build_trend_model, diffuse_init
from ssmsmooth.particle import (
    fixed_lag_average_smooth,
    fixed_lag_smooth,
    gaussian_sampler,
    particle_filter,
    pilot_boundary_priors,
    two_filter_particle_smooth,
)
from ssmsmooth.twofilter import two_filter_smooth_covariance, two_filter_smooth_information

pytestmark = pytest.mark.slow

JUMP_ROWS = (79, 100)  # 0-based rows of the injected jumps
PIECEWISE_JUMPS = (100, 250, 350)
PIECEWISE_SEGMENTS = ((0, 100), (100, 250), (250, 350), (350, 500))


def _component_sd(model, cov, name="trend"):
    row = model.component(name).row
    return np.sqrt(np.einsum("i,tij,j->t", row, cov, row))


def _seasonal_init(ys, model):
    return InitialState(np.zeros(model.state_dim), 100.0 * np.var(ys) * np.eye(model.state_dim))


def _rise_width(trend, j, window=10):
    """Steps between 10% and 90% of the net change over ``j +- window``."""
    seg = trend[j - window:j + window + 1] - trend[j - window]
    frac = seg / seg[-1]
    return int(np.argmax(frac >= 0.9) - np.argmax(frac >= 0.1))


def test_criterion_1_oracle_exactness():
    rng = np.random.default_rng(1)
    worst = 0.0
    t0 = time.perf_counter()
    for _ in range(50):
        model, init = random_gaussian_model(rng)
        ys = rng.normal(size=int(rng.integers(1, 7))) * 2
        traj, sm = smooth(model, init, ys)
        ll = log_likelihood(model, init, ys)
        o = dense_posterior(model.F, model.G, model.H, model.system_cov(), model.obs_var(), init.mean, init.cov, ys)
        errs = [
            np.abs(traj.filtered.mean - o["filt_mean"]).max(),
            np.abs(traj.filtered.cov - o["filt_cov"]).max(),
            np.abs(traj.predicted.mean - o["pred_mean"]).max(),
            np.abs(sm.mean - o["smooth_mean"]).max(),
            np.abs(sm.cov - o["smooth_cov"]).max(),
            abs(ll - o["loglik"]),
            abs(traj.log_likelihood - o["loglik"]),
        ]
        worst = max(worst, *errs)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-8 and elapsed < 5.0
    record_acceptance(1, ok, f"max abs error {worst:.2e} (tol 1e-8), {elapsed:.2f} s (limit 5 s)")
    assert ok


def test_criterion_2_information_two_filter_exact():
    sim = simulate_seasonal(1)
    model, ys = sim.model, sim.ys
    init = _seasonal_init(ys, model)
    t0 = time.perf_counter()
    res = two_filter_smooth_information(model, init, ys)
    elapsed = time.perf_counter() - t0
    _, fis = smooth(model, init, ys)
    dm = np.abs(res.smoothed.mean - fis.mean).max()
    dc = np.abs(np.diagonal(res.smoothed.cov, axis1=1, axis2=2) - np.diagonal(fis.cov, axis1=1, axis2=2)).max()
    ok = dm <= 1e-8 and dc <= 1e-6 and elapsed < 10.0
    record_acceptance(2, ok, f"mean err {dm:.2e} (tol 1e-8), cov diag err {dc:.2e} (tol 1e-6), {elapsed:.2f} s")
    assert ok


def test_criterion_3_covariance_form_narrow_start():
    sim = simulate_seasonal(1)
    model, ys = sim.model, sim.ys
    init = _seasonal_init(ys, model)
    _, fis = smooth(model, init, ys)
    sd_s = _component_sd(model, fis.cov)
    n = np.arange(1, ys.size + 1)
    viol = {}
    for how in ("filter", "inflated"):
        r = two_filter_smooth_covariance(model, init, ys, how)
        viol[how] = n[_component_sd(model, r.backward.filtered.cov) < sd_s]
    early = viol["filter"][viol["filter"] < 12]
    late = viol["inflated"][viol["inflated"] > 24]
    ok = early.size >= 1 and late.size == 0
    record_acceptance(
        3, ok, f"filter-init narrow at n={early.tolist()} (n<12); inflated-init violations beyond n>24: {late.tolist()}"
    )
    assert ok


def test_criterion_4_gsum_degenerates_to_kalman():
    sim = simulate_seasonal(1)
    model, ys = sim.model, sim.ys
    init = diffuse_init(model, ys)
    g = gsum_smooth(model, init, ys, 1, backward_init="filter")
    traj = kalman_filter(model, init, ys)
    ref = two_filter_smooth_covariance(model, init, ys, "filter")
    errs = [
        np.abs(np.array([s.means[0] for s in g.forward.filtered]) - traj.filtered.mean).max(),
        np.abs(np.array([s.covs[0] for s in g.forward.filtered]) - traj.filtered.cov).max(),
        np.abs(np.array([s.means[0] for s in g.backward.filtered]) - ref.backward.filtered.mean).max(),
        np.abs(np.array([s.covs[0] for s in g.backward.filtered]) - ref.backward.filtered.cov).max(),
        np.abs(np.array([s.means[0] for s in g.smoothed]) - ref.smoothed.mean).max(),
        np.abs(np.array([s.covs[0] for s in g.smoothed]) - ref.smoothed.cov).max(),
        abs(g.forward.log_likelihood - traj.log_likelihood),
    ]
    ok = max(errs) <= 1e-10
    record_acceptance(4, ok, f"max abs difference over filter, backward filter, smoother and log-likelihood {max(errs):.2e} (tol 1e-10)")
    assert ok


def _trend_means(model, ys, m_max):
    res = gsum_smooth(model, diffuse_init(model, ys), ys, m_max)
    row = model.component("trend").row
    return np.array([s.moments().mean @ row for s in res.smoothed])


def test_criterion_5_jump_detection():
    ys = inject_jumps(simulate_seasonal(1).ys)
    mix = load_config(CONFIGS / "jump_mixture.ini").build()
    gauss = load_config(CONFIGS / "jump_gaussian.ini").build()
    t2, t10, t1 = _trend_means(mix, ys, 2), _trend_means(mix, ys, 10), _trend_means(gauss, ys, 1)
    steps = [abs(t2[j + 2] - t2[j - 3]) for j in JUMP_ROWS]
    widths = [_rise_width(t1, j) for j in JUMP_ROWS]
    gap, tol = np.abs(t2 - t10).max(), 0.01 * np.ptp(ys)
    ok_step, ok_smear, ok_m = min(steps) >= 100, min(widths) > 5, gap <= tol
    ok = ok_step and ok_smear and ok_m
    record_acceptance(
        5,
        ok,
        f"K_v=2 change within +-2 of n=80,101: {steps[0]:.1f}, {steps[1]:.1f} (>=100) {'ok' if ok_step else 'FAIL'}; "
        f"K_v=1 10-90% rise width {widths} (>5) {'ok' if ok_smear else 'FAIL'}; "
        f"M2 vs M10 max gap {gap:.2f} vs 1% of range {tol:.2f} {'ok' if ok_m else 'FAIL'}",
    )
    assert ok


def test_criterion_6_particle_filter_vs_kalman():
    ys = simulate_piecewise_trend(1)
    model = build_trend_model(1, 0.02, 1.022)
    init = InitialState([ys.mean()], [[ys.var()]])
    m = 100_000
    t0 = time.perf_counter()
    res = particle_filter(model, gaussian_sampler(init.mean, init.cov), ys, m, seed=7)
    elapsed = time.perf_counter() - t0
    kf = kalman_filter(model, init, ys)
    sd = np.sqrt(kf.filtered.cov[:, 0, 0])
    err = np.abs(res.filtered.median("trend") - kf.filtered.mean[:, 0])
    # standard error of a sample median is sqrt(pi/2) sd / sqrt(n), with n the effective sample size
    tol = 4.0 * np.sqrt(np.pi / 2) * sd / np.sqrt(res.filtered.ess)
    frac = float(np.mean(err <= tol))
    frac_raw = float(np.mean(err <= 4.0 * sd / np.sqrt(m)))
    ok = frac >= 0.99 and elapsed < 60.0
    record_acceptance(
        6, ok, f"{frac:.3f} of times within 4 median-SE (>=0.99); plain 4 sd/sqrt(m) gives {frac_raw:.3f}; {elapsed:.1f} s"
    )
    assert ok


def test_criterion_7_fixed_lag_degeneracy():
    sim = simulate_seasonal(1)
    model, ys = sim.model, sim.ys
    _, fwd, _ = pilot_boundary_priors(model, ys)
    counts = []
    for L in (12, 24, 36, 96):
        q = fixed_lag_smooth(model, ys, 10_000, L, seed=5, init_sampler=fwd)
        counts.append(int(q.distinct[ys.size - 1 - L]))
    ok = all(a >= b for a, b in zip(counts, counts[1:]))
    record_acceptance(7, ok, f"distinct particles at oldest slice for L=12,24,36,96: {counts}")
    assert ok


def test_criterion_8_forward_backward_average():
    sim = simulate_seasonal(1)
    model, ys = sim.model, sim.ys
    init, fwd, bwd = pilot_boundary_priors(model, ys)
    q = fixed_lag_average_smooth(model, ys, 100_000, 24, seed=3, init_sampler=fwd, backward_init_sampler=bwd)
    _, sm = smooth(model, init, ys)
    row = model.component("trend").row
    z = np.abs(q.median("trend") - sm.mean @ row) / _component_sd(model, sm.cov)
    interior = z[24:ys.size - 24]
    ok = interior.max() <= 0.5 and q.is_monotone()
    record_acceptance(8, ok, f"max |median - Kalman mean| / Kalman sd over interior: {interior.max():.3f} (<=0.5)")
    assert ok


def test_criterion_9_two_filter_subsampling():
    ys = simulate_piecewise_trend(1)
    model = build_trend_model(1, NoiseSpec.cauchy(0.348), 1.022)
    m = 2000
    small = two_filter_particle_smooth(model, ys, m, 10, seed=1).values["trend"]
    big = two_filter_particle_smooth(model, ys, m, 1000, seed=1).values["trend"]
    other = two_filter_particle_smooth(model, ys, m, 1000, seed=2).values["trend"]
    diff = np.abs(small - big).mean()
    spread = np.abs(other - big).mean()
    ok = diff < 3.0 * spread
    record_acceptance(
        9, ok, f"mean abs quantile gap r=10 vs r=1000: {diff:.4f}; r=1000 seed spread {spread:.4f}; ratio {diff / spread:.2f} (<3)"
    )
    assert ok


def test_criterion_10_cauchy_trend():
    ys = simulate_piecewise_trend(1)
    model = build_trend_model(1, NoiseSpec.cauchy(0.348), 1.022)
    med = two_filter_particle_smooth(model, ys, 10_000, 100, seed=11).median("trend")
    jumps = [abs(med[j + 10] - med[j - 10]) for j in PIECEWISE_JUMPS]
    flat = [np.ptp(med[a + 10:b - 10]) for a, b in PIECEWISE_SEGMENTS]
    ok = min(jumps) >= 0.7 and max(flat) <= 0.3
    record_acceptance(
        10,
        ok,
        f"median change across jumps {np.round(jumps, 2).tolist()} (>=0.7); "
        f"segment interior ranges {np.round(flat, 2).tolist()} (<=0.3)",
    )
    assert ok


def test_criterion_11_mle_self_consistency():
    cfg = load_config(CONFIGS / "local_level.ini")
    hits = 0
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        ys = np.cumsum(rng.standard_normal(500)) + rng.standard_normal(500)
        res = fit(cfg, ys, default_params(cfg.parameters(), ys))
        ratios = np.asarray(res.params.values)
        hits += bool(np.all((ratios >= 0.7) & (ratios <= 1.4)))
    ok = hits >= 18
    record_acceptance(11, ok, f"{hits}/20 replications recover both variances within [0.7, 1.4] of truth (>=18)")
    assert ok
