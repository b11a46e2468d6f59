"""Ground-truth images, perturbed view angles and noisy sinograms."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import FanBeamGeometry, forward_project, wrap_angle
from .rng import make_rng


def nominal_angles(step_deg: float, span_deg: float = 360.0) -> np.ndarray:
    """Equispaced nominal angles ``[0, step, 2 step, ...)`` in radians."""
    if step_deg <= 0:
        raise ValueError("step_deg must be positive")
    q = int(round(span_deg / step_deg))
    return np.deg2rad(np.arange(q) * step_deg)


def _pixel_centers(N):
    c = np.arange(N) + 0.5 - 0.5 * N
    # array (i, j): row i along y, column j along x
    yy, xx = np.meshgrid(c, c, indexing="ij")
    return xx, yy


def grains_phantom(N: int, n_grains: int = 30, seed: int = 0) -> np.ndarray:
    """Piecewise-constant Voronoi grains inside the inscribed disk.

    Each cell gets a value drawn uniformly from ``[0.2, 1]``; pixels whose
    center lies outside the disk are zero.  Returned column-stacked.
    """
    if N < 8:
        raise ValueError("N must be at least 8")
    if n_grains < 1:
        raise ValueError("n_grains must be >= 1")
    rng = make_rng(seed)
    radius = 0.5 * N
    r = radius * np.sqrt(rng.uniform(size=n_grains))
    phi = rng.uniform(0, 2 * np.pi, size=n_grains)
    sites = np.column_stack([r * np.cos(phi), r * np.sin(phi)])
    values = rng.uniform(0.2, 1.0, size=n_grains)

    xx, yy = _pixel_centers(N)
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    dist2 = ((pts[:, None, :] - sites[None, :, :]) ** 2).sum(axis=2)
    img = values[np.argmin(dist2, axis=1)].reshape(N, N)
    img[xx ** 2 + yy ** 2 > radius ** 2] = 0.0
    return img.ravel(order="F")


def ppower_spectrum(N: int, seed: int = 0, cutoff=None):
    """Band-limited random field used by :func:`ppower_phantom`.

    Returns the field (``N x N``) and the Fourier coefficients that generate it.
    """
    rng = make_rng(seed)
    kc = max(2, N // 16) if cutoff is None else int(cutoff)
    k = np.fft.fftfreq(N) * N
    KY, KX = np.meshgrid(k, k, indexing="ij")
    mask = (np.abs(KX) <= kc) & (np.abs(KY) <= kc)
    spec = np.fft.fft2(rng.standard_normal((N, N))) * mask
    field = np.real(np.fft.ifft2(spec))
    return field, spec / (N * N), kc


def ppower_phantom(N: int, seed: int = 0, zero_fraction: float = 0.5, power: float = 2.0,
                   cutoff=None) -> np.ndarray:
    """Smooth random domains on a zero background.

    A low-pass random field ``f`` is shifted by its ``zero_fraction`` quantile,
    rectified, scaled to a maximum of one and raised to ``power``.
    """
    if N < 8:
        raise ValueError("N must be at least 8")
    if not 0 <= zero_fraction < 1:
        raise ValueError("zero_fraction must lie in [0, 1)")
    if power < 1:
        raise ValueError("power must be >= 1")
    f, _, _ = ppower_spectrum(N, seed, cutoff)
    t = np.quantile(f, zero_fraction)
    g = np.clip((f - t) / (f.max() - t), 0.0, 1.0) ** power
    return g.ravel(order="F")


def perturb_angles(a, sigma_true_deg: float, seed: int = 0) -> np.ndarray:
    """``wrap(a + e)`` with ``e ~ N(0, sigma^2)``, sigma given in degrees."""
    if sigma_true_deg < 0:
        raise ValueError("sigma_true_deg must be non-negative")
    a = np.asarray(a, dtype=np.float64)
    e = make_rng(seed).standard_normal(a.shape) * np.deg2rad(sigma_true_deg)
    return wrap_angle(a + e)


@dataclass
class ExperimentTruth:
    x_true: np.ndarray
    theta_true: np.ndarray
    a: np.ndarray
    sigma_obs: float
    lambda_true: float
    b: np.ndarray
    b_clean: np.ndarray


def simulate_sinogram(x_true, theta_true, noise_level: float, geom: FanBeamGeometry, seed: int = 0,
                      a=None) -> ExperimentTruth:
    """Noisy data ``b = A(theta_true) x_true + e`` at relative noise level.

    ``sigma_obs = noise_level * ||A x_true|| / sqrt(m)``.
    """
    if not noise_level > 0:
        raise ValueError("noise_level must be positive")
    theta_true = np.asarray(theta_true, dtype=np.float64)
    clean = forward_project(x_true, geom, theta_true).ravel(order="F")
    m = clean.size
    sigma = noise_level * np.linalg.norm(clean) / np.sqrt(m)
    if not sigma > 0:
        raise ValueError("clean sinogram is zero; noise level undefined")
    b = clean + sigma * make_rng(seed).standard_normal(m)
    return ExperimentTruth(
        x_true=np.asarray(x_true, dtype=np.float64).ravel(order="F"),
        theta_true=theta_true,
        a=theta_true.copy() if a is None else np.asarray(a, dtype=np.float64),
        sigma_obs=float(sigma),
        lambda_true=float(1.0 / sigma ** 2),
        b=b,
        b_clean=clean,
    )
