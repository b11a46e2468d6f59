"""Independent reference implementations used by the tests.

Nothing here calls into the traversal kernel or the matrix-free operators:
chords come from clipping the segment against every pixel box, difference
operators from explicit Kronecker products.
"""
import math

import numpy as np


def clip_segment(p0, p1, lo, hi):
    """Liang-Barsky: parameter interval of ``p0 + t (p1 - p0)`` inside a box."""
    t0, t1 = 0.0, 1.0
    d = (p1[0] - p0[0], p1[1] - p0[1])
    for axis in range(2):
        if d[axis] == 0.0:
            if not lo[axis] <= p0[axis] <= hi[axis]:
                return None
            continue
        ta = (lo[axis] - p0[axis]) / d[axis]
        tb = (hi[axis] - p0[axis]) / d[axis]
        t0 = max(t0, min(ta, tb))
        t1 = min(t1, max(ta, tb))
    if t1 <= t0:
        return None
    return t0, t1


def segment_length_in_square(p0, p1, half):
    seg = clip_segment(p0, p1, (-half, -half), (half, half))
    if seg is None:
        return 0.0
    return (seg[1] - seg[0]) * math.hypot(p1[0] - p0[0], p1[1] - p0[1])


def brute_force_chords(p0, p1, N, fov):
    """Dense length-``N*N`` vector of chord lengths (column-stacked)."""
    h = fov / N
    half = fov / 2
    L = math.hypot(p1[0] - p0[0], p1[1] - p0[1])
    out = np.zeros(N * N)
    for j in range(N):  # x direction
        for i in range(N):  # y direction
            lo = (-half + j * h, -half + i * h)
            hi = (lo[0] + h, lo[1] + h)
            seg = clip_segment(p0, p1, lo, hi)
            if seg is not None:
                out[i + j * N] = (seg[1] - seg[0]) * L
    return out


def ray_endpoints(geom, theta, k):
    c, s = math.cos(theta), math.sin(theta)
    u = (k + 0.5 - geom.p / 2) * geom.det_len / geom.p + geom.det_offset
    return (geom.dso * c, geom.dso * s), (-geom.dod * c - u * s, -geom.dod * s + u * c)


def dense_system_matrix(geom, angles):
    rows = []
    for theta in np.atleast_1d(angles):
        for k in range(geom.p):
            p0, p1 = ray_endpoints(geom, theta, k)
            rows.append(brute_force_chords(p0, p1, geom.N, geom.fov))
    return np.array(rows)


def dense_diff(N):
    D = np.diag(-np.ones(N)) + np.diag(np.ones(N - 1), 1)
    D[-1, :] = 0.0
    eye = np.eye(N)
    return np.kron(eye, D), np.kron(D, eye)


def naive_tv(X):
    """Anisotropic TV of a 2-D array by explicit loops."""
    n0, n1 = X.shape
    tv = 0.0
    for i in range(n0):
        for j in range(n1):
            if i + 1 < n0:
                tv += abs(X[i + 1, j] - X[i, j])
            if j + 1 < n1:
                tv += abs(X[i, j + 1] - X[i, j])
    return tv


def dense_laplace_params(A, b, lam, delta, xbar, eps):
    """Mean and precision of the local Gaussian built at ``xbar``."""
    N = int(round(math.sqrt(A.shape[1])))
    D1, D2 = dense_diff(N)
    W1 = np.diag(1 / np.sqrt((D1 @ xbar) ** 2 + eps))
    W2 = np.diag(1 / np.sqrt((D2 @ xbar) ** 2 + eps))
    L = D1.T @ W1 @ D1 + D2.T @ W2 @ D2
    prec = lam * A.T @ A + delta * L
    mu = np.linalg.solve(prec, lam * A.T @ b)
    return mu, prec


def ar1_chain(rho, n, rng):
    x = np.empty(n)
    x[0] = rng.standard_normal() / math.sqrt(1 - rho ** 2) if rho < 1 else 0.0
    e = rng.standard_normal(n)
    for t in range(1, n):
        x[t] = rho * x[t - 1] + e[t]
    return x


def log_i0_series(kappa, terms=400):
    """``ln I0`` from the power series, summed in log space."""
    k = np.arange(terms)
    from scipy.special import gammaln

    logs = 2 * k * math.log(kappa / 2) - 2 * gammaln(k + 1) if kappa > 0 else np.where(k == 0, 0.0, -np.inf)
    m = np.max(logs)
    return m + math.log(np.exp(logs - m).sum())
