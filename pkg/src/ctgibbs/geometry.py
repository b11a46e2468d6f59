"""Matrix-free fan-beam projector with exact ray/pixel chord lengths.

Rays are zero-thickness lines from the source to each detector element
center. Chord lengths come from a parametric grid traversal (Siddon), so the
forward operator and its adjoint are built from the same numbers.

Conventions
-----------
* The image is an ``N x N`` array ``X[i, j]`` stored column-stacked:
  ``x[i + j * N] == X[i, j]``.  Column ``j`` runs along the physical x-axis,
  row ``i`` along the physical y-axis; the image square is
  ``[-fov/2, fov/2]^2`` centered at the rotation origin.
* ``theta`` is the source azimuth, counterclockwise from +x.  The flat
  detector sits at distance ``dod`` behind the origin, perpendicular to the
  source-origin axis.
* Sinograms are ``p x q`` (detector by angle) with ``b = vec(S)``, i.e. the
  ray for detector ``k`` and angle ``i`` is row ``k + i * p``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from numba import njit

TWO_PI = 2.0 * np.pi


def wrap_angle(theta):
    """Map angles to ``[0, 2*pi)``."""
    out = np.mod(theta, TWO_PI)
    # np.mod returns exactly 2*pi for tiny negative inputs
    out = np.where(out >= TWO_PI, 0.0, out)
    return float(out) if np.ndim(theta) == 0 else out


@dataclass(frozen=True)
class FanBeamGeometry:
    """Scanner constants for a flat-detector fan-beam setup.

    Parameters
    ----------
    dso : float
        Distance from the source to the rotation origin.
    dod : float
        Distance from the origin to the detector.
    det_len : float
        Total detector length.
    p : int
        Number of detector elements.
    N : int
        Image side length in pixels.
    fov : float
        Physical side length of the (square) image domain.
    det_offset : float
        Shift of the detector element centers along the detector axis.
    """

    dso: float
    dod: float
    det_len: float
    p: int
    N: int
    fov: float
    det_offset: float = field(default=0.0)

    def __post_init__(self):
        for name in ("dso", "dod", "det_len", "fov"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be positive and finite, got {val!r}")
        if int(self.p) != self.p or self.p < 1:
            raise ValueError(f"p must be a positive integer, got {self.p!r}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")

    @classmethod
    def reference(cls, N, fov=None, dso=450.0, dod=150.0, det_len=300.0):
        """Geometry with the experimental constants and ``p = ceil(1.5 N)``.

        When ``fov`` is omitted the image square is the largest one that lies
        inside the fan from every source position.
        """
        p = int(math.ceil(1.5 * N))
        if fov is None:
            fov = full_view_fov(dso, dod, det_len, p)
        return cls(dso=float(dso), dod=float(dod), det_len=float(det_len), p=p, N=int(N), fov=float(fov))

    @property
    def d(self) -> int:
        return self.N * self.N

    @property
    def pixel_size(self) -> float:
        return self.fov / self.N

    @property
    def det_spacing(self) -> float:
        return self.det_len / self.p

    def det_positions(self) -> np.ndarray:
        """Offsets of the detector element centers along the detector axis."""
        k = np.arange(self.p, dtype=np.float64)
        return (k + 0.5 - 0.5 * self.p) * self.det_spacing + self.det_offset

    def n_rows(self, q: int) -> int:
        return self.p * q


def full_view_fov(dso, dod, det_len, p):
    """Side of the largest centered square seen by the outermost rays."""
    u_max = 0.5 * det_len - 0.5 * det_len / p
    half_fan = math.atan(u_max / (dso + dod))
    radius = dso * math.sin(half_fan)
    return math.sqrt(2.0) * radius


@dataclass(frozen=True)
class Ray:
    angle: float
    det_index: int
    source_point: tuple
    det_point: tuple


def make_ray(geom: FanBeamGeometry, theta: float, k: int) -> Ray:
    if not 0 <= k < geom.p:
        raise IndexError(f"detector index {k} out of range [0, {geom.p})")
    c, s = math.cos(theta), math.sin(theta)
    u = geom.det_positions()[k]
    src = (geom.dso * c, geom.dso * s)
    det = (-geom.dod * c - u * s, -geom.dod * s + u * c)
    return Ray(float(wrap_angle(theta)), int(k), src, det)


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------


@njit(cache=True)
def _trace(sx, sy, ex, ey, n, half, h, idx, lens, start):
    """Write the chords of segment (s -> e) into idx/lens from ``start``.

    Returns the number of entries written.
    """
    dx = ex - sx
    dy = ey - sy
    seg_len = math.sqrt(dx * dx + dy * dy)
    if seg_len == 0.0:
        return 0
    tmin = 0.0
    tmax = 1.0
    if dx == 0.0:
        if sx < -half or sx >= half:
            return 0
    else:
        t1 = (-half - sx) / dx
        t2 = (half - sx) / dx
        tmin = max(tmin, min(t1, t2))
        tmax = min(tmax, max(t1, t2))
    if dy == 0.0:
        if sy < -half or sy >= half:
            return 0
    else:
        t1 = (-half - sy) / dy
        t2 = (half - sy) / dy
        tmin = max(tmin, min(t1, t2))
        tmax = min(tmax, max(t1, t2))
    if tmax <= tmin:
        return 0

    inf = np.inf
    if dx > 0.0:
        kx = math.ceil((sx + tmin * dx + half) / h)
        ax = (kx * h - half - sx) / dx
        dax = h / dx
    elif dx < 0.0:
        kx = math.floor((sx + tmin * dx + half) / h)
        ax = (kx * h - half - sx) / dx
        dax = -h / dx
    else:
        ax = inf
        dax = inf
    if dy > 0.0:
        ky = math.ceil((sy + tmin * dy + half) / h)
        ay = (ky * h - half - sy) / dy
        day = h / dy
    elif dy < 0.0:
        ky = math.floor((sy + tmin * dy + half) / h)
        ay = (ky * h - half - sy) / dy
        day = -h / dy
    else:
        ay = inf
        day = inf

    cnt = 0
    cur = tmin
    for _ in range(2 * n + 4):
        while ax <= cur:
            ax += dax
        while ay <= cur:
            ay += day
        nxt = min(ax, ay, tmax)
        mid = 0.5 * (cur + nxt)
        j = int(math.floor((sx + mid * dx + half) / h))
        i = int(math.floor((sy + mid * dy + half) / h))
        if j < 0:
            j = 0
        elif j >= n:
            j = n - 1
        if i < 0:
            i = 0
        elif i >= n:
            i = n - 1
        pix = i + j * n
        if cnt > 0 and idx[start + cnt - 1] == pix:
            # rounding at a grid crossing can split one chord in two
            lens[start + cnt - 1] += (nxt - cur) * seg_len
        else:
            idx[start + cnt] = pix
            lens[start + cnt] = (nxt - cur) * seg_len
            cnt += 1
        cur = nxt
        if cur >= tmax:
            break
    return cnt


@njit(cache=True)
def _ray_endpoints(theta, dso, dod, u):
    c = math.cos(theta)
    s = math.sin(theta)
    return dso * c, dso * s, -dod * c - u * s, -dod * s + u * c


@njit(cache=True)
def _build_rows(thetas, dso, dod, upos, n, half, h):
    p = upos.shape[0]
    q = thetas.shape[0]
    cap = 2 * n + 4
    idx = np.empty(p * q * cap, dtype=np.int64)
    lens = np.empty(p * q * cap, dtype=np.float64)
    indptr = np.zeros(p * q + 1, dtype=np.int64)
    pos = 0
    for a in range(q):
        for k in range(p):
            sx, sy, ex, ey = _ray_endpoints(thetas[a], dso, dod, upos[k])
            pos += _trace(sx, sy, ex, ey, n, half, h, idx, lens, pos)
            indptr[a * p + k + 1] = pos
    return idx[:pos], lens[:pos], indptr


@njit(cache=True)
def _project_one(x, theta, dso, dod, upos, n, half, h, out):
    p = upos.shape[0]
    cap = 2 * n + 4
    idx = np.empty(cap, dtype=np.int64)
    lens = np.empty(cap, dtype=np.float64)
    for k in range(p):
        sx, sy, ex, ey = _ray_endpoints(theta, dso, dod, upos[k])
        cnt = _trace(sx, sy, ex, ey, n, half, h, idx, lens, 0)
        acc = 0.0
        for t in range(cnt):
            acc += lens[t] * x[idx[t]]
        out[k] = acc
    return out


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------


def trace_ray(ray: Ray, geom: FanBeamGeometry):
    """Pixels crossed by ``ray`` and their chord lengths.

    Returns
    -------
    indices : ndarray of int
        Column-stacked pixel indices in traversal order (source to detector).
    lengths : ndarray of float
        Intersection lengths, all positive.
    """
    return trace_segment(ray.source_point, ray.det_point, geom.N, geom.fov)


def trace_segment(start, end, N, fov):
    cap = 2 * int(N) + 4
    idx = np.empty(cap, dtype=np.int64)
    lens = np.empty(cap, dtype=np.float64)
    cnt = _trace(float(start[0]), float(start[1]), float(end[0]), float(end[1]),
                 int(N), 0.5 * fov, fov / N, idx, lens, 0)
    return idx[:cnt].copy(), lens[:cnt].copy()


def _angles(angles):
    a = np.atleast_1d(np.asarray(angles, dtype=np.float64))
    if a.ndim != 1:
        raise ValueError("angles must be a 1-D vector")
    if not np.all(np.isfinite(a)):
        raise ValueError("angles must be finite")
    return a


def system_matrix(geom: FanBeamGeometry, angles) -> sp.csr_matrix:
    """Sparse ``A(theta)`` of shape ``(p*q, N*N)``."""
    a = _angles(angles)
    idx, lens, indptr = _build_rows(a, geom.dso, geom.dod, geom.det_positions(),
                                    geom.N, 0.5 * geom.fov, geom.pixel_size)
    return sp.csr_matrix((lens, idx, indptr), shape=(geom.p * a.size, geom.d))


def _check_image(x, geom):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        if x.shape != (geom.N, geom.N):
            raise ValueError(f"image shape {x.shape} does not match N={geom.N}")
        x = x.ravel(order="F")
    if x.shape != (geom.d,):
        raise ValueError(f"image has {x.size} entries, geometry expects {geom.d}")
    return x


def forward_project(x, geom: FanBeamGeometry, angles) -> np.ndarray:
    """Sinogram ``S`` (``p x q``) of image ``x`` at the given view angles."""
    x = _check_image(x, geom)
    a = _angles(angles)
    return (system_matrix(geom, a) @ x).reshape((geom.p, a.size), order="F")


def back_project(r, geom: FanBeamGeometry, angles) -> np.ndarray:
    """Adjoint ``A(theta)^T r``; accepts a ``p x q`` sinogram or its vec."""
    a = _angles(angles)
    r = np.asarray(r, dtype=np.float64)
    if r.ndim == 2:
        if r.shape != (geom.p, a.size):
            raise ValueError(f"sinogram shape {r.shape} != {(geom.p, a.size)}")
        r = r.ravel(order="F")
    if r.shape != (geom.p * a.size,):
        raise ValueError(f"sinogram has {r.size} entries, expected {geom.p * a.size}")
    return system_matrix(geom, a).T @ r


def forward_project_angle(x, geom: FanBeamGeometry, theta: float) -> np.ndarray:
    """Single view ``A(theta_i) x`` (length ``p``), traced without assembling A."""
    x = _check_image(x, geom)
    out = np.empty(geom.p, dtype=np.float64)
    return _project_one(x, float(theta), geom.dso, geom.dod, geom.det_positions(),
                        geom.N, 0.5 * geom.fov, geom.pixel_size, out)


class Projector:
    """``A(theta)`` assembled once for a fixed angle vector.

    Used inside the sampler where many products share the same angles.
    """

    def __init__(self, geom: FanBeamGeometry, angles):
        self.geom = geom
        self.angles = _angles(angles).copy()
        self.A = system_matrix(geom, self.angles)
        self.AT = self.A.T.tocsr()

    @property
    def shape(self):
        return self.A.shape

    def forward(self, x):
        return self.A @ x

    def adjoint(self, r):
        return self.AT @ r


class ViewProjector:
    """Single-view projections ``A(theta) x`` for a fixed image, repeated cheaply."""

    def __init__(self, geom: FanBeamGeometry):
        self.geom = geom
        self._args = (geom.dso, geom.dod, geom.det_positions(), geom.N, 0.5 * geom.fov, geom.pixel_size)

    def __call__(self, x, theta, out=None):
        if out is None:
            out = np.empty(self.geom.p)
        return _project_one(x, float(theta), *self._args, out)
