"""Neumann first differences and the smoothed-l1 weight machinery.

``D1 = I_N kron D`` differences along each stacked column (array axis 0) and
``D2 = D kron I_N`` across columns (array axis 1), with ``D`` the forward
difference whose last row is zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _side(v):
    n = int(round(np.sqrt(v.size)))
    if n * n != v.size:
        raise ValueError(f"vector of length {v.size} is not a square image")
    return n


def apply_diff(direction: int, v) -> np.ndarray:
    """Return ``D1 v`` (direction 1) or ``D2 v`` (direction 2)."""
    v = np.asarray(v, dtype=np.float64)
    n = _side(v)
    X = v.reshape((n, n), order="F")
    out = np.zeros_like(X)
    if direction == 1:
        out[:-1, :] = X[1:, :] - X[:-1, :]
    elif direction == 2:
        out[:, :-1] = X[:, 1:] - X[:, :-1]
    else:
        raise ValueError(f"direction must be 1 or 2, got {direction!r}")
    return out.ravel(order="F")


def apply_diff_T(direction: int, w) -> np.ndarray:
    """Transpose action ``D1^T w`` or ``D2^T w``."""
    w = np.asarray(w, dtype=np.float64)
    n = _side(w)
    W = w.reshape((n, n), order="F")
    out = np.zeros_like(W)
    if direction == 1:
        out[:-1, :] -= W[:-1, :]
        out[1:, :] += W[:-1, :]
    elif direction == 2:
        out[:, :-1] -= W[:, :-1]
        out[:, 1:] += W[:, :-1]
    else:
        raise ValueError(f"direction must be 1 or 2, got {direction!r}")
    return out.ravel(order="F")


def diff_matrices(n: int):
    """Sparse ``(D1, D2)`` for an ``n x n`` grid."""
    import scipy.sparse as sp

    D = sp.diags([-np.ones(n), np.ones(n - 1)], [0, 1], format="lil")
    D[n - 1, n - 1] = 0.0
    D = D.tocsr()
    eye = sp.identity(n, format="csr")
    return sp.kron(eye, D, format="csr"), sp.kron(D, eye, format="csr")


def smoothed_abs(t, eps):
    """``sqrt(t^2 + eps)``, a smooth stand-in for ``|t|``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return np.sqrt(np.square(t) + eps)


def anisotropic_tv(x) -> float:
    """Exact ``||D1 x||_1 + ||D2 x||_1``."""
    return float(np.abs(apply_diff(1, x)).sum() + np.abs(apply_diff(2, x)).sum())


def smoothed_tv(x, eps) -> float:
    return float(smoothed_abs(apply_diff(1, x), eps).sum() + smoothed_abs(apply_diff(2, x), eps).sum())


@dataclass(frozen=True)
class DiffWeights:
    """Diagonals of ``W1(x)`` and ``W2(x)`` for smoothing constant ``eps``."""

    w1: np.ndarray
    w2: np.ndarray
    eps: float

    @property
    def d(self) -> int:
        return self.w1.size


def compute_weights(x, eps) -> DiffWeights:
    """``w_k = 1 / sqrt((D_k x)^2 + eps)``; bounded above by ``eps**-0.5``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    w1 = 1.0 / smoothed_abs(apply_diff(1, x), eps)
    w2 = 1.0 / smoothed_abs(apply_diff(2, x), eps)
    return DiffWeights(w1, w2, float(eps))


def apply_L(w: DiffWeights, v) -> np.ndarray:
    """``L v = D1^T W1 D1 v + D2^T W2 D2 v``."""
    v = np.asarray(v, dtype=np.float64)
    if v.size != w.d:
        raise ValueError(f"vector length {v.size} does not match weights ({w.d})")
    return apply_diff_T(1, w.w1 * apply_diff(1, v)) + apply_diff_T(2, w.w2 * apply_diff(2, v))


def quadratic_form_L(x, eps) -> float:
    """``x^T L(x) x`` evaluated as ``sum (D x)^2 / sqrt((D x)^2 + eps)``."""
    g1 = apply_diff(1, x)
    g2 = apply_diff(2, x)
    return float(np.sum(g1 * g1 / smoothed_abs(g1, eps)) + np.sum(g2 * g2 / smoothed_abs(g2, eps)))
