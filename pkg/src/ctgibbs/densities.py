"""Log densities of the hierarchical CT posterior and derivatives of the cost.

Every function that needs ``A(theta)`` accepts the geometry and angles; an
already assembled :class:`~ctgibbs.geometry.Projector` can be passed as
``projector=`` to avoid rebuilding the system matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import i0e

from .geometry import Projector, forward_project_angle, wrap_angle
from .regularizers import (
    anisotropic_tv,
    apply_L,
    compute_weights,
    quadratic_form_L,
    smoothed_tv,
)

LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class HyperState:
    lam: float
    delta: float
    kappa: float

    def __post_init__(self):
        for name in ("lam", "delta", "kappa"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")


@dataclass
class AngleState:
    theta: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        self.theta = wrap_angle(np.asarray(self.theta, dtype=np.float64))
        self.a = wrap_angle(np.asarray(self.a, dtype=np.float64))
        if self.theta.shape != self.a.shape:
            raise ValueError("theta and a must have the same length")

    @property
    def q(self) -> int:
        return self.theta.size


def log_i0(kappa):
    """``ln I0(kappa)`` via the exponentially scaled Bessel function."""
    return np.log(i0e(kappa)) + kappa


def _proj(geom, theta, projector):
    if projector is not None:
        return projector
    return Projector(geom, theta)


def _residual(x, theta, b, geom, projector=None):
    P = _proj(geom, theta, projector)
    b = np.asarray(b, dtype=np.float64).ravel(order="F")
    x = np.asarray(x, dtype=np.float64).ravel(order="F")
    if b.size != P.shape[0]:
        raise ValueError(f"data length {b.size} != {P.shape[0]} rays")
    if x.size != P.shape[1]:
        raise ValueError(f"image length {x.size} != {P.shape[1]} pixels")
    return P.forward(x) - b, P


def log_likelihood(x, theta, lam, b, geom, projector=None) -> float:
    """Gaussian log-likelihood including the ``-(m/2) ln 2 pi`` constant."""
    if not lam > 0:
        raise ValueError("lam must be positive")
    r, _ = _residual(x, theta, b, geom, projector)
    m = r.size
    return 0.5 * m * (math.log(lam) - LOG_2PI) - 0.5 * lam * float(r @ r)


def log_prior_x(x, delta) -> float:
    """Laplace difference prior with the exact (non-smoothed) l1 norm."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    x = np.asarray(x, dtype=np.float64).ravel(order="F")
    return x.size * math.log(delta / 2.0) - delta * anisotropic_tv(x)


def log_prior_theta(theta, a, kappa) -> float:
    """Independent von Mises prior, normalized."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    theta = np.atleast_1d(theta)
    q = theta.size
    return -q * (LOG_2PI + float(log_i0(kappa))) + kappa * float(np.cos(theta - np.atleast_1d(a)).sum())


def log_hyperprior(value, beta) -> float:
    """Exponential(rate=beta) log density."""
    return math.log(beta) - beta * value


def cost_J(x, theta, lam, delta, eps, b, geom, projector=None) -> float:
    """Negative log of the x-conditional with smoothed absolute values."""
    r, _ = _residual(x, theta, b, geom, projector)
    return 0.5 * lam * float(r @ r) + delta * smoothed_tv(x, eps)


def grad_J(x, theta, lam, delta, eps, b, geom, projector=None) -> np.ndarray:
    r, P = _residual(x, theta, b, geom, projector)
    w = compute_weights(x, eps)
    return lam * P.adjoint(r) + delta * apply_L(w, x)


def apply_hessian(xbar, v, lam, delta, eps, geom, theta, projector=None) -> np.ndarray:
    """Approximate Hessian ``lam A^T A + delta L(xbar)`` applied to ``v``."""
    P = _proj(geom, theta, projector)
    v = np.asarray(v, dtype=np.float64)
    if v.size != P.shape[1] or np.size(xbar) != P.shape[1]:
        raise ValueError("dimension mismatch between xbar, v and geometry")
    out = lam * P.adjoint(P.forward(v))
    if delta != 0:
        out = out + delta * apply_L(compute_weights(xbar, eps), v)
    return out


def log_cond_theta_from_projection(proj_i, s_i, theta_i, a_i, lam, kappa) -> float:
    r = proj_i - s_i
    return -0.5 * lam * float(r @ r) + kappa * math.cos(theta_i - a_i)


def log_cond_theta_component(i, theta_i, x, lam, kappa, a, S, geom) -> float:
    """Unnormalized log density of angle ``i`` given everything else.

    ``a`` holds all nominal angles and ``S`` is the ``p x q`` sinogram.
    """
    q = np.size(a)
    if not 0 <= i < q:
        raise IndexError(f"angle index {i} out of range [0, {q})")
    S = np.asarray(S, dtype=np.float64).reshape((geom.p, q), order="F")
    proj = forward_project_angle(x, geom, theta_i)
    return log_cond_theta_from_projection(proj, S[:, i], theta_i, float(np.asarray(a)[i]), lam, kappa)


def log_cond_theta(theta, x, lam, kappa, a, b, geom, projector=None) -> float:
    """Unnormalized log of the full angle conditional."""
    r, _ = _residual(x, theta, b, geom, projector)
    return -0.5 * lam * float(r @ r) + kappa * float(np.cos(np.asarray(theta) - np.asarray(a)).sum())


def log_cond_kappa(kappa, theta, a, beta) -> float:
    """``-q ln I0(kappa) - kappa * (beta - sum cos(theta - a))``."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    theta = np.atleast_1d(theta)
    q = theta.size
    c = float(np.cos(theta - np.atleast_1d(a)).sum())
    return -q * float(log_i0(kappa)) - kappa * (beta - c)


def log_cond_delta(delta, x, beta) -> float:
    """Exact delta conditional (unnormalized), exact l1 differences."""
    x = np.asarray(x, dtype=np.float64).ravel(order="F")
    return x.size * math.log(delta) - delta * (anisotropic_tv(x) + beta)


def log_cond_delta_smoothed(delta, x, beta, eps) -> float:
    """Gamma surrogate of :func:`log_cond_delta` using ``x^T L(x) x``."""
    x = np.asarray(x, dtype=np.float64).ravel(order="F")
    return x.size * math.log(delta) - delta * (quadratic_form_L(x, eps) + beta)


def log_target(x, theta, lam, delta, kappa, b, a, beta, geom, projector=None) -> float:
    """Joint unnormalized log posterior with constant terms dropped."""
    r, _ = _residual(x, theta, b, geom, projector)
    m, d = r.size, np.size(x)
    q = np.size(theta)
    return (0.5 * m * math.log(lam) + d * math.log(delta) - q * float(log_i0(kappa))
            - 0.5 * lam * float(r @ r) - delta * anisotropic_tv(x)
            + kappa * float(np.cos(np.asarray(theta) - np.asarray(a)).sum())
            - beta * (lam + delta + kappa))
