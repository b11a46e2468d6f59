"""End-to-end acceptance suite: one test per criterion, each at its stated tolerance.

Every test records a ``PASS``/``FAIL criterion k: ...`` line, printed as it
runs (visible with ``-s``) and repeated in the pytest terminal summary.
Criteria 6 to 8 share a single desk-scale reconstruction (about two minutes).
Run on its own with ``pytest tests/test_acceptance.py -v``.
"""
import math
import time

import numpy as np
import pytest

from ctgibbs.cgls import laplace_draw, map_lagged_diffusivity
from ctgibbs.densities import cost_J, grad_J, log_cond_delta, log_cond_delta_smoothed, log_i0
from ctgibbs.diagnostics import (
    angle_error,
    circular_mean,
    edge_mask,
    iact,
    msj,
    posterior_image_stats,
    rel_error,
)
from ctgibbs.geometry import FanBeamGeometry, Projector, forward_project
from ctgibbs.gibbs import (
    GibbsConfig,
    ProblemData,
    delta_rate,
    run,
    sample_delta,
    sample_lambda,
)
from ctgibbs.phantoms import grains_phantom, nominal_angles, perturb_angles, simulate_sinogram

from conftest import ACCEPTANCE_LOG
from oracles import ar1_chain, dense_laplace_params


def record(k, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}"
    ACCEPTANCE_LOG[k] = line
    print(line)
    assert ok, line


def test_criterion_01_adjoint():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    geom = FanBeamGeometry.reference(32)
    P = Projector(geom, rng.uniform(0, 2 * np.pi, 20))
    worst = 0.0
    for _ in range(100):
        x, r = rng.standard_normal(geom.d), rng.standard_normal(P.shape[0])
        Ax = P.forward(x)
        worst = max(worst, abs(Ax @ r - x @ P.adjoint(r)) / (np.linalg.norm(Ax) * np.linalg.norm(r)))
    el = time.perf_counter() - t0
    record(1, worst <= 1e-10 and el < 10, f"adjoint mismatch {worst:.2e} (<= 1e-10), {el:.2f} s (< 10 s)")


def test_criterion_02_gradient():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    geom = FanBeamGeometry.reference(8)
    theta = rng.uniform(0, 2 * np.pi, 6)
    x = rng.uniform(0, 1, 64)
    b = forward_project(rng.uniform(0, 1, 64), geom, theta).ravel(order="F")
    args = (theta, 0.7, 1.3, 1e-6, b, geom)
    P = Projector(geom, theta)
    g = grad_J(x, *args, projector=P)
    h = 1e-5
    fd = np.empty(64)
    for i in range(64):
        e = np.zeros(64)
        e[i] = h
        fd[i] = (cost_J(x + e, *args, projector=P) - cost_J(x - e, *args, projector=P)) / (2 * h)
    err = np.max(np.abs(g - fd) / np.abs(fd))
    el = time.perf_counter() - t0
    record(2, err <= 1e-4 and el < 10, f"max componentwise relative error {err:.2e} (<= 1e-4), {el:.2f} s")


def test_criterion_03_gaussian_oracle(toy6):
    t0 = time.perf_counter()
    geom, angles, truth = toy6
    lam, delta, eps = truth.lambda_true, 3.0, 1e-6
    xbar = truth.x_true
    P = Projector(geom, angles)
    rng = np.random.default_rng(3)
    n = 20_000
    draws = np.empty((n, 36))
    for t in range(n):
        draws[t] = laplace_draw(xbar, angles, lam, delta, eps, 100, truth.b, geom, rng, projector=P, tol=1e-13)
    mu, prec = dense_laplace_params(P.A.toarray(), truth.b, lam, delta, xbar, eps)
    cov = np.linalg.inv(prec)
    z = np.abs(draws.mean(axis=0) - mu) / np.sqrt(np.diag(cov) / n)
    cov_err = np.linalg.norm(np.cov(draws, rowvar=False) - cov) / np.linalg.norm(cov)
    el = time.perf_counter() - t0
    ok = z.max() <= 3 and cov_err <= 0.15 and el < 120
    record(3, ok, f"max |mean - mu|/SE {z.max():.2f} (<= 3), covariance rel. Frobenius {cov_err:.3f} "
                  f"(<= 0.15), {el:.1f} s (< 120 s)")


def test_criterion_04_gamma_conditionals(toy6):
    t0 = time.perf_counter()
    geom, angles, truth = toy6
    data = ProblemData(truth.b, geom, angles)
    beta, eps = 1e-4, 1e-6
    x = truth.x_true + 0.05 * np.random.default_rng(4).standard_normal(36)
    r = Projector(geom, angles).forward(x) - truth.b
    lam_mean = (data.m / 2 + 1) / (0.5 * r @ r + beta)
    delta_mean = (36 + 1) / delta_rate(x, beta, eps)
    rng = np.random.default_rng(5)
    n = 100_000
    rsq = float(r @ r)
    lam = np.array([sample_lambda(x, angles, data, beta, rng, residual_sq=rsq) for _ in range(n)])
    dl = np.array([sample_delta(x, beta, eps, rng) for _ in range(n)])
    e1 = abs(lam.mean() / lam_mean - 1)
    e2 = abs(dl.mean() / delta_mean - 1)
    el = time.perf_counter() - t0
    record(4, e1 <= 0.01 and e2 <= 0.01 and el < 30,
           f"lambda mean off by {e1:.2%}, delta mean off by {e2:.2%} (<= 1%), {el:.1f} s (< 30 s)")


def test_criterion_05_smoothed_delta_conditional():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    x = rng.standard_normal(256)
    beta = 1e-4
    X = x.reshape(16, 16)
    mode = 256 / (np.abs(np.diff(X, axis=0)).sum() + np.abs(np.diff(X, axis=1)).sum() + beta)
    grid = np.linspace(0.1 * mode, 3 * mode, 200)
    exact = np.array([log_cond_delta(d, x, beta) for d in grid])
    smooth = np.array([log_cond_delta_smoothed(d, x, beta, 1e-6) for d in grid])
    # shape matching: remove the best constant offset between the two log curves
    diff = exact - smooth
    dev = np.max(np.abs(diff - diff.mean()))
    el = time.perf_counter() - t0
    record(5, dev < 1e-2 and el < 30, f"max shape-matched deviation {dev:.2e} (< 1e-2), {el:.2f} s")


@pytest.fixture(scope="module")
def desk_run():
    N = 64
    geom = FanBeamGeometry.reference(N)
    x_true = grains_phantom(N, 30, seed=0)
    a = nominal_angles(8)
    theta_true = perturb_angles(a, 0.5, seed=1)
    truth = simulate_sinogram(x_true, theta_true, 0.01, geom, seed=2, a=a)
    data = ProblemData(truth.b, geom, a)
    out = {"x_true": x_true, "theta_true": theta_true, "a": a}
    for mode, sample in (("uncertain", True), ("fixed", False)):
        cfg = GibbsConfig(n_s=2000, burn_in_frac=0.2, thinning=2, n_cgls=10, nbar_s=10, sample_angles=sample)
        t0 = time.perf_counter()
        chain = run(cfg, data)
        out[mode] = (chain, time.perf_counter() - t0)
    return out


@pytest.mark.slow
def test_criterion_06_reconstruction(desk_run):
    (cu, tu), (cf, tf) = desk_run["uncertain"], desk_run["fixed"]
    eta_u = rel_error(posterior_image_stats(cu.x)[0], desk_run["x_true"])
    eta_f = rel_error(posterior_image_stats(cf.x)[0], desk_run["x_true"])
    ok = eta_u <= 0.10 and eta_u <= 0.6 * eta_f and tu + tf < 900
    record(6, ok, f"eta uncertain {eta_u:.4f} (<= 0.10), fixed {eta_f:.4f}, ratio {eta_u / eta_f:.3f} "
                  f"(<= 0.6), {tu + tf:.0f} s (< 900 s)")


@pytest.mark.slow
def test_criterion_07_angle_recovery(desk_run):
    chain, _ = desk_run["uncertain"]
    tt, a = desk_run["theta_true"], desk_run["a"]
    post = np.rad2deg(angle_error(circular_mean(chain.theta), tt).mean())
    nom = np.rad2deg(angle_error(a, tt).mean())
    record(7, post <= 0.5 * nom, f"posterior-mean angle MAE {post:.4f} deg vs nominal {nom:.4f} deg "
                                 f"(ratio {post / nom:.3f} <= 0.5)")


@pytest.mark.slow
def test_criterion_08_edge_uncertainty(desk_run):
    chain, _ = desk_run["uncertain"]
    _, std = posterior_image_stats(chain.x)
    edge = edge_mask(desk_run["x_true"])
    se, si = std[edge].mean(), std[~edge].mean()
    record(8, se > si, f"mean posterior std on edges {se:.4g} vs interior {si:.4g}")


def test_criterion_09_independence_acceptance(toy6):
    geom, angles, truth = toy6
    cfg = GibbsConfig(n_s=500, burn_in_frac=0.0, thinning=1, n_cgls=100, nbar_s=1, x_adjust="is",
                      cgls_tol=1e-13, seed=9)
    chain = run(cfg, ProblemData(truth.b, geom, angles))
    rate = chain.is_accepted.mean()
    record(9, rate >= 0.99 and chain.is_accepted.size == 500,
           f"independence-sampler acceptance {rate:.3f} over {chain.is_accepted.size} steps (>= 0.99)")


def test_criterion_10_lagged_diffusivity_monotone():
    geom = FanBeamGeometry.reference(16)
    x = grains_phantom(16, 8, seed=10)
    theta = nominal_angles(10)
    b = forward_project(x, geom, theta).ravel(order="F")
    _, hist = map_lagged_diffusivity(theta, 100.0, 1.0, 1e-6, 20, 30, b, geom)
    hist = np.asarray(hist)
    rise = np.max(np.diff(hist) / np.abs(hist[:-1]))
    record(10, rise <= 1e-10 and hist.size == 21,
           f"largest relative increase of J over 20 outer steps {rise:.2e} (<= 1e-10), J {hist[0]:.4g} -> {hist[-1]:.4g}")


def test_criterion_11_diagnostics_oracles():
    rng = np.random.default_rng(11)
    errs = []
    for rho in (0.0, 0.5, 0.9):
        tau = iact(ar1_chain(rho, 100_000, rng))
        errs.append(abs(tau / ((1 + rho) / (1 - rho)) - 1))
    q, s = 5, 0.4
    m = msj(rng.normal(0, s, (100_000, q)))
    merr = abs(m / (2 * q * s ** 2) - 1)
    record(11, max(errs) <= 0.15 and merr <= 0.05,
           f"IACT relative errors {', '.join(f'{e:.3f}' for e in errs)} (<= 0.15), MSJ error {merr:.4f} (<= 0.05)")


def test_criterion_12_cost_accounting(toy6):
    geom, angles, truth = toy6
    data = ProblemData(truth.b, geom, angles)
    parts, ok = [], True
    for n_cgls, nbar_s in ((10, 10), (4, 7), (1, 1)):
        chain = run(GibbsConfig(n_s=15, n_cgls=n_cgls, nbar_s=nbar_s, cgls_tol=0.0), data)
        expected = 2 * n_cgls + nbar_s + 1
        seen = sorted(set(chain.model_calls.tolist()))
        ok &= seen == [expected]
        parts.append(f"(n_cgls={n_cgls}, nbar_s={nbar_s}) observed {seen} expected {expected}")
    record(12, ok, "model calls per iteration " + "; ".join(parts))


def test_criterion_13_bessel_stability():
    k = 1e4
    v = float(log_i0(k))
    rel = abs(v - (k - 0.5 * math.log(2 * math.pi * k))) / abs(v)
    with np.errstate(over="raise", invalid="raise"):
        big = log_i0(np.logspace(-3, 6, 200))
    ok = math.isfinite(v) and rel <= 1e-3 and np.all(np.isfinite(big))
    record(13, ok, f"ln I0(1e4) = {v:.6f}, relative gap to asymptote {rel:.2e} (<= 1e-3), finite up to 1e6")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v", "-s"]))
