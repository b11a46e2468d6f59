"""Hybrid Gibbs sampler for images, view angles and hyperparameters.

One iteration, in order:

1. ``x``: perturbed least-squares draw from the local Laplace approximation
   around the previous image (``2 * n_cgls`` model calls).
2. Refresh the difference weights from the new image.
3. ``theta``: ``nbar_s`` sweeps of single-component random-walk Metropolis
   (one model call per sweep; a sweep projects every view once).
4. ``lambda``: gamma draw.  The per-view projections of the new image are
   computed once (one model call) and reused by the angle sweeps.
5. ``delta``: gamma draw from the smoothed surrogate (no model calls).
6. ``kappa``: ``nbar_s`` random-walk Metropolis steps on ``log kappa``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .cgls import StackedOperator, cgls_solve, log_is_ratio
from .densities import log_cond_kappa, log_cond_theta_from_projection
from .geometry import TWO_PI, FanBeamGeometry, Projector, ViewProjector, wrap_angle
from .regularizers import DiffWeights, apply_diff, compute_weights
from .rng import gamma_sample, substream

log = logging.getLogger(__name__)

KAPPA_TARGET_ACCEPT = 0.44
X_ADJUST_MODES = ("none", "monitor", "is")


class SamplerError(RuntimeError):
    """A conditional update failed; ``iteration`` is the 1-based Gibbs step."""

    def __init__(self, iteration, cause):
        super().__init__(f"sampler failed at iteration {iteration}: {cause}")
        self.iteration = iteration


@dataclass
class GibbsConfig:
    n_s: int = 2000
    burn_in_frac: float = 0.2
    thinning: int = 2
    n_cgls: int = 10
    nbar_s: int = 10
    eps: float = 1e-6
    beta: float = 1e-4
    sigma_theta: float | None = None  # radians; None -> 5% of nominal spacing
    kappa_step: float = 0.1
    adapt_kappa: bool = True
    sample_angles: bool = True
    random_scan: bool = False
    x_adjust: str = "none"
    cgls_tol: float = 1e-10
    warm_start: bool = True  # CGLS starts from the previous image
    lam0: float = 1.0
    delta0: float = 1.0
    kappa0: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if int(self.n_s) != self.n_s or self.n_s < 1:
            raise ValueError("n_s must be a positive integer")
        if not 0 <= self.burn_in_frac < 1:
            raise ValueError("burn_in_frac must lie in [0, 1)")
        if int(self.thinning) != self.thinning or self.thinning < 1:
            raise ValueError("thinning must be a positive integer")
        for name in ("n_cgls", "nbar_s"):
            if int(getattr(self, name)) != getattr(self, name) or getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        for name in ("eps", "beta", "kappa_step", "lam0", "delta0", "kappa0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.sigma_theta is not None and not self.sigma_theta >= 0:
            raise ValueError("sigma_theta must be non-negative")
        if self.x_adjust not in X_ADJUST_MODES:
            raise ValueError(f"x_adjust must be one of {X_ADJUST_MODES}")

    @property
    def burn_in(self) -> int:
        return int(round(self.burn_in_frac * self.n_s))

    @property
    def n_keep(self) -> int:
        return (self.n_s - self.burn_in) // self.thinning

    def keeps(self, j: int) -> bool:
        """Whether 1-based iteration ``j`` is stored."""
        k = j - self.burn_in
        return k > 0 and k % self.thinning == 0

    def calls_per_iteration(self) -> int:
        return 2 * self.n_cgls + (self.nbar_s if self.sample_angles else 0) + 1

    def proposal_std(self, a) -> float:
        if self.sigma_theta is not None:
            return float(self.sigma_theta)
        a = np.asarray(a)
        spacing = float(np.mod(a[1] - a[0], TWO_PI)) if a.size > 1 else TWO_PI
        return 0.05 * spacing


@dataclass
class ProblemData:
    """Sinogram, geometry and nominal view angles."""

    b: np.ndarray
    geom: FanBeamGeometry
    a: np.ndarray

    def __post_init__(self):
        self.a = wrap_angle(np.atleast_1d(np.asarray(self.a, dtype=np.float64)))
        self.b = np.asarray(self.b, dtype=np.float64).ravel(order="F")
        if self.b.size != self.geom.p * self.a.size:
            raise ValueError(f"sinogram has {self.b.size} entries; geometry with q={self.a.size} "
                             f"views expects {self.geom.p * self.a.size}")
        if not np.all(np.isfinite(self.b)):
            raise ValueError("sinogram contains non-finite values")

    @property
    def q(self) -> int:
        return self.a.size

    @property
    def m(self) -> int:
        return self.b.size

    @property
    def S(self) -> np.ndarray:
        return self.b.reshape((self.geom.p, self.q), order="F")


@dataclass
class SamplerStats:
    model_calls: int = 0
    theta_accept: np.ndarray | None = None
    theta_proposals: int = 0
    kappa_accept: int = 0
    kappa_proposals: int = 0


@dataclass
class GibbsChain:
    """Kept samples plus per-iteration bookkeeping."""

    x: np.ndarray
    theta: np.ndarray
    lam: np.ndarray
    delta: np.ndarray
    kappa: np.ndarray
    kept_iterations: np.ndarray
    model_calls: np.ndarray
    theta_accept: np.ndarray
    theta_proposals: int
    kappa_accept: int
    kappa_proposals: int
    lam_trace: np.ndarray
    delta_trace: np.ndarray
    kappa_trace: np.ndarray
    kappa_step: float
    is_alpha: np.ndarray = field(default_factory=lambda: np.empty(0))
    is_accepted: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=bool))
    config: dict = field(default_factory=dict)

    @property
    def n_records(self) -> int:
        return self.lam.size

    @property
    def theta_acceptance_rate(self) -> np.ndarray:
        per_comp = self.theta_proposals / max(self.theta_accept.size, 1)
        return self.theta_accept / max(per_comp, 1)

    @property
    def kappa_acceptance_rate(self) -> float:
        return self.kappa_accept / max(self.kappa_proposals, 1)


def initial_image(data: ProblemData, projector: Projector | None = None) -> np.ndarray:
    """Backprojection normalized by the column sums of ``A``."""
    P = projector if projector is not None else Projector(data.geom, data.a)
    colsum = P.adjoint(np.ones(data.m))
    bp = P.adjoint(data.b)
    out = np.zeros_like(bp)
    hit = colsum > 0
    out[hit] = bp[hit] / colsum[hit]
    return out


# ---------------------------------------------------------------------------
# conditional updates
# ---------------------------------------------------------------------------


def sample_x(prev_x, theta, lam, delta, cfg: GibbsConfig, data: ProblemData, rng, *,
             weights: DiffWeights | None = None, projector: Projector | None = None,
             stats: SamplerStats | None = None, xi=None, prev_projection=None):
    """Unadjusted local Laplace draw anchored at ``prev_x``.

    With ``cfg.warm_start`` CGLS starts from ``prev_x``; passing
    ``prev_projection = A(theta) prev_x`` avoids recomputing it.
    """
    P = projector if projector is not None else Projector(data.geom, theta)
    w = weights if weights is not None else compute_weights(prev_x, cfg.eps)
    M = StackedOperator(P, lam, delta, w)
    if xi is None:
        xi = rng.standard_normal(M.shape[0])
    x0 = Mx0 = None
    if cfg.warm_start:
        x0 = prev_x
        if prev_projection is not None:
            Mx0 = M.stack(prev_projection, prev_x)
    res = cgls_solve(M, M.rhs(data.b, xi), cfg.n_cgls, cfg.cgls_tol, x0=x0, Mx0=Mx0)
    if stats is not None:
        stats.model_calls += 2 * res.iters
    return res.x


def sample_theta(prev_theta, x, lam, kappa, cfg: GibbsConfig, data: ProblemData, rng, *,
                 projections=None, view_projector: ViewProjector | None = None,
                 stats: SamplerStats | None = None, sigma=None):
    """``nbar_s`` component-wise random-walk Metropolis sweeps.

    ``projections`` (``p x q``) holds ``A(theta_i) x`` for the incoming
    angles and is updated in place; when omitted it is computed here.
    """
    theta = wrap_angle(np.array(prev_theta, dtype=np.float64))
    q = theta.size
    S = data.S
    a = data.a
    view = view_projector if view_projector is not None else ViewProjector(data.geom)
    if projections is None:
        projections = np.empty((data.geom.p, q), order="F")
        for i in range(q):
            view(x, theta[i], projections[:, i])
        if stats is not None:
            stats.model_calls += 1
    sigma = cfg.proposal_std(a) if sigma is None else sigma
    if stats is not None and stats.theta_accept is None:
        stats.theta_accept = np.zeros(q, dtype=np.int64)

    logp = np.array([log_cond_theta_from_projection(projections[:, i], S[:, i], theta[i], a[i], lam, kappa)
                     for i in range(q)])
    buf = np.empty(data.geom.p)
    for _ in range(cfg.nbar_s):
        order = rng.permutation(q) if cfg.random_scan else range(q)
        steps = rng.standard_normal(q)
        logu = np.log(rng.uniform(size=q))
        for i in order:
            prop = theta[i] + sigma * steps[i]
            view(x, prop, buf)
            lp = log_cond_theta_from_projection(buf, S[:, i], prop, a[i], lam, kappa)
            if logu[i] < lp - logp[i]:
                theta[i] = prop
                logp[i] = lp
                projections[:, i] = buf
                if stats is not None:
                    stats.theta_accept[i] += 1
        if stats is not None:
            stats.model_calls += 1
            stats.theta_proposals += q
    return wrap_angle(theta)


def sample_lambda(x, theta, data: ProblemData, beta, rng, *, residual_sq=None, projector=None,
                  stats: SamplerStats | None = None):
    """Gamma(m/2 + 1, ||A x - b||^2 / 2 + beta) draw."""
    if residual_sq is None:
        P = projector if projector is not None else Projector(data.geom, theta)
        r = P.forward(x) - data.b
        residual_sq = float(r @ r)
        if stats is not None:
            stats.model_calls += 1
    return float(gamma_sample(0.5 * data.m + 1.0, 0.5 * residual_sq + beta, rng))


def delta_rate(x, beta, eps, weights: DiffWeights | None = None) -> float:
    """``x^T L(x) x + beta``."""
    w = weights if weights is not None else compute_weights(x, eps)
    g1 = apply_diff(1, x)
    g2 = apply_diff(2, x)
    return float(g1 @ (w.w1 * g1) + g2 @ (w.w2 * g2)) + beta


def sample_delta(x, beta, eps, rng, *, weights: DiffWeights | None = None):
    """Gamma(d + 1, x^T L(x) x + beta) draw (smoothed-l1 surrogate)."""
    return float(gamma_sample(np.size(x) + 1.0, delta_rate(x, beta, eps, weights), rng))


def log_kappa_target(log_kappa, theta, a, beta) -> float:
    """Conditional of ``log kappa``, i.e. ``log pi5(e^k) + k``."""
    return log_cond_kappa(math.exp(log_kappa), theta, a, beta) + log_kappa


def sample_kappa(kappa_prev, theta, a, beta, cfg: GibbsConfig, rng, *, step=None,
                 stats: SamplerStats | None = None, n_steps=None):
    """Random-walk Metropolis on ``log kappa``; returns (kappa, n_accepted)."""
    step = cfg.kappa_step if step is None else step
    n_steps = cfg.nbar_s if n_steps is None else n_steps
    k = math.log(kappa_prev)
    lp = log_kappa_target(k, theta, a, beta)
    acc = 0
    z = rng.standard_normal(n_steps)
    logu = np.log(rng.uniform(size=n_steps))
    for t in range(n_steps):
        kp = k + step * z[t]
        lpp = log_kappa_target(kp, theta, a, beta)
        if logu[t] < lpp - lp:
            k, lp = kp, lpp
            acc += 1
    if stats is not None:
        stats.kappa_accept += acc
        stats.kappa_proposals += n_steps
    return math.exp(k), acc


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


def run(cfg: GibbsConfig, data: ProblemData, init: dict | None = None, progress: bool = False) -> GibbsChain:
    """Run the hybrid Gibbs sampler and return the kept chain.

    ``init`` may override any of ``x``, ``theta``, ``lam``, ``delta``,
    ``kappa``.  With ``cfg.sample_angles = False`` the angles stay at the
    nominal values (and ``kappa``, which then has no influence, is not
    updated).
    """
    init = dict(init or {})
    geom, q, d = data.geom, data.q, data.geom.d
    rngs = {name: substream(cfg.seed, name) for name in ("x", "theta", "lambda", "delta", "kappa")}

    theta = wrap_angle(np.asarray(init.get("theta", data.a), dtype=np.float64).copy())
    lam = float(init.get("lam", cfg.lam0))
    delta = float(init.get("delta", cfg.delta0))
    kappa = float(init.get("kappa", cfg.kappa0))
    if "x" in init:
        x = np.asarray(init["x"], dtype=np.float64).ravel(order="F").copy()
    else:
        x = initial_image(data, Projector(geom, theta))
    weights = compute_weights(x, cfg.eps)
    # A(theta) x for the current state; refreshed once per iteration and kept
    # in sync by the angle sweeps, so warm starts need no extra projection
    projections = Projector(geom, theta).forward(x).reshape((geom.p, q), order="F").copy(order="F")

    n_keep = cfg.n_keep
    xs = np.empty((n_keep, d))
    thetas = np.empty((n_keep, q))
    lams, deltas, kappas = (np.empty(n_keep) for _ in range(3))
    kept = np.empty(n_keep, dtype=np.int64)
    calls = np.empty(cfg.n_s, dtype=np.int64)
    lam_tr, delta_tr, kappa_tr = (np.empty(cfg.n_s) for _ in range(3))
    is_alpha, is_acc = [], []

    stats = SamplerStats(theta_accept=np.zeros(q, dtype=np.int64))
    view = ViewProjector(geom)
    sigma = cfg.proposal_std(data.a)
    kstep = cfg.kappa_step
    burn_in = cfg.burn_in
    S = data.S
    rec = 0
    report_every = max(1, cfg.n_s // 10)

    for j in range(1, cfg.n_s + 1):
        before = stats.model_calls
        try:
            P = Projector(geom, theta)
            x_prev = x
            x = sample_x(x_prev, theta, lam, delta, cfg, data, rngs["x"], weights=weights,
                         projector=P, stats=stats, prev_projection=projections)
            if cfg.x_adjust != "none":
                lr = log_is_ratio(x_prev, x, theta, lam, delta, cfg.eps, data.b, geom,
                                  projector=P, weights=weights)
                alpha = math.exp(min(0.0, lr))
                accepted = math.log(rngs["x"].uniform()) < lr
                is_alpha.append(alpha)
                is_acc.append(accepted)
                if cfg.x_adjust == "is" and not accepted:
                    x = x_prev
            weights = compute_weights(x, cfg.eps)

            projections = P.forward(x).reshape((geom.p, q), order="F").copy(order="F")
            stats.model_calls += 1
            if cfg.sample_angles:
                theta = sample_theta(theta, x, lam, kappa, cfg, data, rngs["theta"], projections=projections,
                                     view_projector=view, stats=stats, sigma=sigma)
            r = projections - S
            lam = sample_lambda(x, theta, data, cfg.beta, rngs["lambda"], residual_sq=float(np.sum(r * r)))
            delta = sample_delta(x, cfg.beta, cfg.eps, rngs["delta"], weights=weights)
            if cfg.sample_angles:
                kappa, acc = sample_kappa(kappa, theta, data.a, cfg.beta, cfg, rngs["kappa"], step=kstep,
                                          stats=stats)
                if cfg.adapt_kappa and j <= burn_in:
                    gain = j ** -0.6
                    kstep *= math.exp(gain * (acc / cfg.nbar_s - KAPPA_TARGET_ACCEPT))
        except Exception as exc:  # noqa: BLE001 - re-raised with the iteration index
            raise SamplerError(j, exc) from exc

        calls[j - 1] = stats.model_calls - before
        lam_tr[j - 1], delta_tr[j - 1], kappa_tr[j - 1] = lam, delta, kappa
        if cfg.keeps(j):
            xs[rec] = x
            thetas[rec] = theta
            lams[rec], deltas[rec], kappas[rec] = lam, delta, kappa
            kept[rec] = j
            rec += 1
        if progress and j % report_every == 0:
            log.info("iteration %d/%d  lambda=%.4g delta=%.4g kappa=%.4g", j, cfg.n_s, lam, delta, kappa)

    return GibbsChain(
        x=xs, theta=thetas, lam=lams, delta=deltas, kappa=kappas, kept_iterations=kept,
        model_calls=calls, theta_accept=stats.theta_accept, theta_proposals=stats.theta_proposals,
        kappa_accept=stats.kappa_accept, kappa_proposals=stats.kappa_proposals,
        lam_trace=lam_tr, delta_trace=delta_tr, kappa_trace=kappa_tr, kappa_step=kstep,
        is_alpha=np.asarray(is_alpha), is_accepted=np.asarray(is_acc, dtype=bool), config=asdict(cfg),
    )
