"""Sampling the local Laplace approximation by perturbed least squares.

A draw from ``N(mu_L, Lambda_L^{-1})`` with ``Lambda_L = lam A^T A +
delta L(xbar)`` and ``mu_L = Lambda_L^{-1} lam A^T b`` is the minimizer of
``||M z - y||`` where ``M = [sqrt(lam) A; sqrt(delta) W1^1/2 D1;
sqrt(delta) W2^1/2 D2]`` and ``y = [sqrt(lam) b; 0; 0] + xi``, ``xi`` standard
normal.  The minimizer is computed with CGLS, started at zero unless an
initial iterate is supplied.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Projector
from .regularizers import (
    DiffWeights,
    anisotropic_tv,
    apply_diff,
    apply_diff_T,
    compute_weights,
)


class CGLSBreakdown(ArithmeticError):
    """Search direction with zero curvature while the normal residual is nonzero."""


class StackedOperator:
    """Matrix-free ``M`` for the perturbed least-squares problem.

    ``calls`` counts applications of ``A`` or ``A^T``.
    """

    def __init__(self, projector: Projector, lam: float, delta: float, weights: DiffWeights):
        m, d = projector.shape
        if weights.d != d:
            raise ValueError(f"weights have length {weights.d}, projector has {d} columns")
        self.projector = projector
        self.lam = float(lam)
        self.delta = float(delta)
        self.weights = weights
        self.m = m
        self.d = d
        self._sl = np.sqrt(self.lam)
        self._s1 = np.sqrt(self.delta * weights.w1)
        self._s2 = np.sqrt(self.delta * weights.w2)
        self.calls = 0

    @property
    def shape(self):
        return (self.m + 2 * self.d, self.d)

    def matvec(self, v):
        self.calls += 1
        return np.concatenate([
            self._sl * self.projector.forward(v),
            self._s1 * apply_diff(1, v),
            self._s2 * apply_diff(2, v),
        ])

    def stack(self, Av, v):
        """``M v`` from a precomputed projection ``Av`` (not counted as a call)."""
        return np.concatenate([
            self._sl * np.asarray(Av, dtype=np.float64).ravel(order="F"),
            self._s1 * apply_diff(1, v),
            self._s2 * apply_diff(2, v),
        ])

    def rmatvec(self, u):
        self.calls += 1
        m, d = self.m, self.d
        return (self._sl * self.projector.adjoint(u[:m])
                + apply_diff_T(1, self._s1 * u[m:m + d])
                + apply_diff_T(2, self._s2 * u[m + d:]))

    def rhs(self, b, xi=None):
        """``[sqrt(lam) b; 0; 0]`` plus an optional perturbation."""
        y = np.zeros(self.m + 2 * self.d)
        y[:self.m] = self._sl * np.asarray(b, dtype=np.float64).ravel(order="F")
        if xi is not None:
            y += xi
        return y


@dataclass
class CGLSResult:
    x: np.ndarray
    iters: int
    normal_residuals: list = field(default_factory=list)
    residuals: list = field(default_factory=list)


def cgls_solve(M, y, n_iter: int, tol: float = 1e-10, x0=None, Mx0=None) -> CGLSResult:
    """CGLS for ``min ||M x - y||`` started at ``x0`` (default zero).

    ``Mx0`` may carry a precomputed ``M @ x0`` to save one operator call.

    Stops after ``n_iter`` iterations or once the normal-equation residual
    ``||M^T (y - M x_k)||`` drops below ``tol`` times its initial value.
    ``residuals`` (``||y - M x_k||``) is non-increasing.
    """
    if n_iter < 1:
        raise ValueError("n_iter must be >= 1")
    y = np.asarray(y, dtype=np.float64)
    if x0 is None:
        x = np.zeros(M.shape[1])
        r = y.copy()
    else:
        x = np.array(x0, dtype=np.float64)
        r = y - (M.matvec(x) if Mx0 is None else np.asarray(Mx0, dtype=np.float64))
    s = M.rmatvec(r)
    p = s.copy()
    gamma = float(s @ s)
    s0 = np.sqrt(gamma)
    out = CGLSResult(x, 0, [s0], [float(np.sqrt(r @ r))])
    if s0 == 0.0:
        return out
    for k in range(1, n_iter + 1):
        qv = M.matvec(p)
        curv = float(qv @ qv)
        if curv == 0.0:
            raise CGLSBreakdown(f"zero curvature at CGLS iteration {k}")
        alpha = gamma / curv
        x += alpha * p
        r -= alpha * qv
        s = M.rmatvec(r)
        gamma_new = float(s @ s)
        out.iters = k
        out.normal_residuals.append(np.sqrt(gamma_new))
        out.residuals.append(float(np.sqrt(r @ r)))
        if np.sqrt(gamma_new) <= tol * s0:
            break
        p = s + (gamma_new / gamma) * p
        gamma = gamma_new
    return out


def _setup(xbar, theta, lam, delta, eps, geom, projector, weights):
    if not (lam > 0 and delta > 0 and eps > 0):
        raise ValueError("lam, delta and eps must be positive")
    P = projector if projector is not None else Projector(geom, theta)
    w = weights if weights is not None else compute_weights(xbar, eps)
    return StackedOperator(P, lam, delta, w)


def laplace_draw(xbar, theta, lam, delta, eps, n_cgls, b, geom, rng, *,
                 projector=None, weights=None, xi=None, tol=1e-10, x0=None, full_output=False):
    """One draw from the local Laplace approximation around ``xbar``.

    Pass ``xi`` to fix the perturbation (``xi = 0`` gives the quasi-Newton
    step).  ``x0`` warm-starts CGLS; the draw is unaffected at full
    convergence.  With ``full_output`` the :class:`CGLSResult` and the operator are
    returned as well.
    """
    M = _setup(xbar, theta, lam, delta, eps, geom, projector, weights)
    if xi is None:
        xi = rng.standard_normal(M.shape[0])
    res = cgls_solve(M, M.rhs(b, xi), n_cgls, tol, x0=x0)
    if full_output:
        return res.x, res, M
    return res.x


def map_lagged_diffusivity(theta, lam, delta, eps, n_outer, n_cgls, b, geom, *,
                           x0=None, projector=None, tol=1e-10):
    """Lagged diffusivity fixed point for the smoothed MAP estimate.

    Each outer step freezes the weights at the current iterate and runs
    ``n_cgls`` CGLS iterations on the resulting least-squares problem,
    starting from that iterate, so ``J`` never increases.

    Returns
    -------
    x : ndarray
        Final iterate.
    J_history : list of float
        Cost at the starting point and after every outer iteration.
    """
    from .densities import cost_J

    if n_outer < 1:
        raise ValueError("n_outer must be >= 1")
    P = projector if projector is not None else Projector(geom, theta)
    x = np.zeros(P.shape[1]) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    hist = [cost_J(x, theta, lam, delta, eps, b, geom, projector=P)]
    for _ in range(n_outer):
        M = StackedOperator(P, lam, delta, compute_weights(x, eps))
        # starting CGLS at the current iterate makes every inner iteration
        # decrease the frozen-weight quadratic, which majorizes J
        x = cgls_solve(M, M.rhs(b), n_cgls, tol, x0=x).x
        hist.append(cost_J(x, theta, lam, delta, eps, b, geom, projector=P))
    return x, hist


def log_is_ratio(x_prev, x_star, theta, lam, delta, eps, b, geom, *, projector=None, weights=None):
    """Log acceptance ratio of the independence sampler anchored at ``x_prev``.

    Both proposal densities share ``Lambda_L(x_prev)``, so normalizing
    constants cancel, and ``Lambda_L mu_L = lam A^T b`` turns the quadratic
    forms into ``0.5 ||M x||^2 - lam <A x, b>`` up to a common constant.
    """
    P = projector if projector is not None else Projector(geom, theta)
    w = weights if weights is not None else compute_weights(x_prev, eps)
    M = StackedOperator(P, lam, delta, w)
    b = np.asarray(b, dtype=np.float64).ravel(order="F")

    def log_pi1(x):
        r = P.forward(x) - b
        return -0.5 * lam * float(r @ r) - delta * anisotropic_tv(x)

    def log_q(x):
        Mx = M.matvec(x)
        return -0.5 * float(Mx @ Mx) + lam * float(P.forward(x) @ b)

    return (log_pi1(x_star) - log_pi1(x_prev)) - (log_q(x_star) - log_q(x_prev))


def is_acceptance(x_prev, x_star, theta, lam, delta, eps, b, geom, **kw) -> float:
    """Independence-sampler acceptance probability in ``[0, 1]``."""
    if np.array_equal(x_prev, x_star):
        return 1.0
    lr = log_is_ratio(x_prev, x_star, theta, lam, delta, eps, b, geom, **kw)
    return float(np.exp(min(0.0, lr)))


__all__ = [
    "CGLSBreakdown",
    "CGLSResult",
    "StackedOperator",
    "cgls_solve",
    "is_acceptance",
    "laplace_draw",
    "log_is_ratio",
    "map_lagged_diffusivity",
]
