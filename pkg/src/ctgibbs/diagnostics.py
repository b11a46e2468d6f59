"""Chain diagnostics and reconstruction summaries."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def autocorrelation(chain) -> np.ndarray:
    """Normalized autocorrelation ``rho_k / rho_0`` for all lags (FFT based)."""
    x = np.asarray(chain, dtype=np.float64)
    n = x.size
    x = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n] / n
    if acov[0] == 0:
        return np.ones(n)
    return acov / acov[0]


def iact(chain, full_output=False):
    """Integrated autocorrelation time with Geyer's initial positive sequence.

    ``tau = 1 + 2 sum_k rho_k``, summing pairs ``rho_{2t} + rho_{2t+1}`` while
    they stay positive.  A constant chain gives ``tau = 1`` and, with
    ``full_output``, a ``degenerate=True`` flag.
    """
    x = np.asarray(chain, dtype=np.float64).ravel()
    if x.size < 10:
        raise ValueError("chain must have at least 10 states")
    if np.all(x == x[0]):
        return (1.0, True) if full_output else 1.0
    rho = autocorrelation(x)
    n_pairs = rho.size // 2
    pairs = rho[:2 * n_pairs].reshape(n_pairs, 2).sum(axis=1)
    neg = np.nonzero(pairs <= 0)[0]
    stop = neg[0] if neg.size else n_pairs
    tau = -1.0 + 2.0 * pairs[:stop].sum()
    return (float(tau), False) if full_output else float(tau)


def ess(chain) -> float:
    """``ceil(n / max(tau, 1))``."""
    x = np.asarray(chain, dtype=np.float64).ravel()
    if x.size == 1:
        return 1.0
    if x.size < 10:
        raise ValueError("chain must have at least 10 states")
    return float(math.ceil(x.size / max(iact(x), 1.0)))


def msj(chain, circular=False) -> float:
    """Mean squared jump between consecutive states.

    ``chain`` is ``(n,)`` or ``(n, q)``.  With ``circular`` the differences
    are wrapped to ``(-pi, pi]`` first.
    """
    c = np.asarray(chain, dtype=np.float64)
    if c.ndim == 1:
        c = c[:, None]
    if c.shape[0] < 2:
        raise ValueError("need at least two states")
    diff = np.diff(c, axis=0)
    if circular:
        diff = np.pi - np.mod(np.pi - diff, 2 * np.pi)
    return float(np.mean(np.sum(diff * diff, axis=1)))


def rel_error(x, x_true) -> float:
    x_true = np.asarray(x_true, dtype=np.float64).ravel()
    nrm = np.linalg.norm(x_true)
    if nrm == 0:
        raise ValueError("reference image is zero")
    return float(np.linalg.norm(np.asarray(x, dtype=np.float64).ravel() - x_true) / nrm)


def posterior_image_stats(xs):
    """Pixelwise sample mean and unbiased standard deviation of ``(n, d)`` samples."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[0] < 2:
        raise ValueError("need at least two samples stacked as (n, d)")
    return xs.mean(axis=0), xs.std(axis=0, ddof=1)


def cumulative_mean(chain) -> np.ndarray:
    c = np.asarray(chain, dtype=np.float64)
    return np.cumsum(c, axis=0) / np.arange(1, c.shape[0] + 1).reshape((-1,) + (1,) * (c.ndim - 1))


def circular_mean(angles, axis=0):
    """Mean direction in ``[0, 2 pi)``."""
    ang = np.asarray(angles, dtype=np.float64)
    m = np.arctan2(np.sin(ang).mean(axis=axis), np.cos(ang).mean(axis=axis))
    return np.mod(m, 2 * np.pi)


def circular_std(angles, axis=0):
    """Spread of angles around their circular mean (small-dispersion std)."""
    ang = np.asarray(angles, dtype=np.float64)
    mu = circular_mean(ang, axis=axis)
    dev = np.pi - np.mod(np.pi - (ang - np.expand_dims(mu, axis)), 2 * np.pi)
    return dev.std(axis=axis, ddof=1)


def angle_error(a, b) -> np.ndarray:
    """Absolute wrapped difference in ``[0, pi]``."""
    d = np.mod(np.asarray(a) - np.asarray(b), 2 * np.pi)
    return np.minimum(d, 2 * np.pi - d)


def edge_mask(x_true, N=None) -> np.ndarray:
    """Pixels touching a nonzero forward difference of the true image."""
    x = np.asarray(x_true, dtype=np.float64).ravel()
    N = int(round(math.sqrt(x.size))) if N is None else N
    X = x.reshape((N, N), order="F")
    edge = np.zeros_like(X, dtype=bool)
    dv = X[1:, :] != X[:-1, :]
    dh = X[:, 1:] != X[:, :-1]
    edge[1:, :] |= dv
    edge[:-1, :] |= dv
    edge[:, 1:] |= dh
    edge[:, :-1] |= dh
    return edge.ravel(order="F")


@dataclass
class ChainSummary:
    name: str
    mean: float
    std: float
    msj: float
    iact: float
    n_ess: float
    degenerate: bool = False


def summarize(name, chain) -> ChainSummary:
    c = np.asarray(chain, dtype=np.float64).ravel()
    if c.size < 10:
        raise ValueError(f"chain {name!r} has {c.size} states; need at least 10")
    tau, flag = iact(c, full_output=True)
    return ChainSummary(
        name=name,
        mean=float(c.mean()),
        std=float(c.std(ddof=1)),
        msj=msj(c),
        iact=tau,
        n_ess=ess(c),
        degenerate=flag,
    )
