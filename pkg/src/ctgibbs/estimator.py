"""scikit-learn style front ends.

Both estimators take the sinogram ``S`` (``p x q``, detector by view) as
``X`` and the nominal view angles as the ``angles`` fit parameter.  Images
are returned as ``N x N`` arrays (row ``i`` along y, column ``j`` along x).
"""
from __future__ import annotations


import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_angles, check_count, check_positive, check_sinogram
from .cgls import map_lagged_diffusivity
from .diagnostics import circular_mean, circular_std, posterior_image_stats
from .geometry import FanBeamGeometry, Projector, forward_project
from .gibbs import GibbsConfig, ProblemData, initial_image, run


def _geometry(est, p_data):
    N = check_count("N", est.N, minimum=1)
    geom = FanBeamGeometry.reference(N, fov=est.fov, dso=est.dso, dod=est.dod, det_len=est.det_len)
    if geom.p != p_data:
        raise ValueError(f"sinogram has {p_data} detector rows; N={N} implies p={geom.p}")
    return geom


class HybridGibbsReconstructor(BaseEstimator):
    """Posterior sampling of image, view angles and hyperparameters.

    Parameters
    ----------
    N : int
        Image side length; the detector count is ``ceil(1.5 N)``.
    dso, dod, det_len : float
        Scanner distances and detector length.
    fov : float or None
        Physical image width; ``None`` picks the largest square seen from
        every angle.
    n_s, burn_in_frac, thinning, n_cgls, nbar_s, eps, beta, sigma_theta, warm_start :
        Sampler settings, see :class:`ctgibbs.gibbs.GibbsConfig`.
    sample_angles : bool
        ``False`` keeps the angles at their nominal values.
    random_state : int
        Run seed.

    Attributes
    ----------
    chain_ : GibbsChain
        Kept samples.
    image_mean_, image_std_ : ndarray of shape (N, N)
        Pixelwise posterior mean and standard deviation.
    angles_mean_, angles_std_ : ndarray of shape (q,)
        Circular posterior mean and spread of the view angles.
    lambda_mean_, delta_mean_, kappa_mean_ : float
        Posterior means of the hyperparameters.
    """

    def __init__(self, N=64, dso=450.0, dod=150.0, det_len=300.0, fov=None, n_s=2000, burn_in_frac=0.2,
                 thinning=2, n_cgls=10, nbar_s=10, eps=1e-6, beta=1e-4, sigma_theta=None, warm_start=True,
                 sample_angles=True, random_state=0):
        self.N = N
        self.dso = dso
        self.dod = dod
        self.det_len = det_len
        self.fov = fov
        self.n_s = n_s
        self.burn_in_frac = burn_in_frac
        self.thinning = thinning
        self.n_cgls = n_cgls
        self.nbar_s = nbar_s
        self.eps = eps
        self.beta = beta
        self.sigma_theta = sigma_theta
        self.warm_start = warm_start
        self.sample_angles = sample_angles
        self.random_state = random_state

    def _config(self) -> GibbsConfig:
        return GibbsConfig(
            n_s=self.n_s, burn_in_frac=self.burn_in_frac, thinning=self.thinning, n_cgls=self.n_cgls,
            nbar_s=self.nbar_s, eps=self.eps, beta=self.beta, sigma_theta=self.sigma_theta,
            warm_start=self.warm_start, sample_angles=self.sample_angles, seed=int(self.random_state),
        )

    def fit(self, X, y=None, angles=None):
        """Sample the posterior for sinogram ``X`` taken at nominal ``angles``."""
        if angles is None:
            raise ValueError("the nominal view angles must be passed as fit(X, angles=...)")
        a = check_angles(angles)
        S = check_sinogram(X, n_views=a.size)
        geom = _geometry(self, S.shape[0])
        cfg = self._config()
        if cfg.n_keep < 2:
            raise ValueError("n_s, burn_in_frac and thinning leave fewer than two kept samples")
        self.geometry_ = geom
        self.nominal_angles_ = a
        self.chain_ = run(cfg, ProblemData(S, geom, a))
        mean, std = posterior_image_stats(self.chain_.x)
        self.image_mean_ = mean.reshape((geom.N, geom.N), order="F")
        self.image_std_ = std.reshape((geom.N, geom.N), order="F")
        self.angles_mean_ = circular_mean(self.chain_.theta) if self.sample_angles else a.copy()
        self.angles_std_ = circular_std(self.chain_.theta) if self.sample_angles else np.zeros_like(a)
        self.lambda_mean_ = float(self.chain_.lam.mean())
        self.delta_mean_ = float(self.chain_.delta.mean())
        self.kappa_mean_ = float(self.chain_.kappa.mean())
        return self

    def predict(self, X=None):
        """Sinogram of the posterior-mean image at the posterior-mean angles."""
        check_is_fitted(self, "chain_")
        return forward_project(self.image_mean_.ravel(order="F"), self.geometry_, self.angles_mean_)


class LaggedDiffusivityMAP(TransformerMixin, BaseEstimator):
    """Smoothed-TV MAP reconstruction with fixed angles and hyperparameters.

    ``fit`` records the geometry and angles; ``transform`` reconstructs any
    sinogram taken with them.

    Parameters
    ----------
    lam, delta : float
        Noise precision and prior scale.  ``lam=None`` uses ``1 / var(S)``
        as a crude scale.
    n_outer, n_cgls : int
        Fixed-point and inner CGLS iterations.
    """

    def __init__(self, N=64, dso=450.0, dod=150.0, det_len=300.0, fov=None, lam=None, delta=1.0, eps=1e-6,
                 n_outer=10, n_cgls=30):
        self.N = N
        self.dso = dso
        self.dod = dod
        self.det_len = det_len
        self.fov = fov
        self.lam = lam
        self.delta = delta
        self.eps = eps
        self.n_outer = n_outer
        self.n_cgls = n_cgls

    def fit(self, X, y=None, angles=None):
        if angles is None:
            raise ValueError("the view angles must be passed as fit(X, angles=...)")
        a = check_angles(angles)
        S = check_sinogram(X, n_views=a.size)
        check_positive("lam", self.lam, allow_none=True)
        check_positive("delta", self.delta)
        check_positive("eps", self.eps)
        check_count("n_outer", self.n_outer)
        check_count("n_cgls", self.n_cgls)
        self.geometry_ = _geometry(self, S.shape[0])
        self.angles_ = a
        self.projector_ = Projector(self.geometry_, a)
        return self

    def transform(self, X):
        """Return the ``N x N`` MAP image for each call's sinogram."""
        check_is_fitted(self, "projector_")
        S = check_sinogram(X, n_views=self.angles_.size)
        if S.shape[0] != self.geometry_.p:
            raise ValueError(f"sinogram has {S.shape[0]} detector rows, expected {self.geometry_.p}")
        b = S.ravel(order="F")
        lam = self.lam if self.lam is not None else 1.0 / max(float(np.var(b)), np.finfo(float).tiny)
        data = ProblemData(b, self.geometry_, self.angles_)
        x0 = initial_image(data, self.projector_)
        x, hist = map_lagged_diffusivity(self.angles_, lam, self.delta, self.eps, self.n_outer, self.n_cgls, b,
                                         self.geometry_, x0=x0, projector=self.projector_)
        self.cost_history_ = hist
        N = self.geometry_.N
        return x.reshape((N, N), order="F")
