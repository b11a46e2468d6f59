"""Data and chain bundles: directories of binary arrays plus metadata.

Data bundle (written by ``simulate``)::

    meta.json        sizes, noise level, sigma_obs, lambda_true, PGM scalings
    config.ini       the configuration that produced the bundle
    x_true.bin       N x N true image (array layout, row i along y)
    theta_true.bin   q true view angles (radians)
    a.bin            q nominal angles (radians)
    b.bin            p x q noisy sinogram
    x_true.pgm, sinogram.pgm   16-bit previews

Chain bundle (written by ``reconstruct``)::

    meta.json              run summary (eta, model calls, acceptance, scalings)
    x.bin                  n_keep x d kept images, column-stacked vectors
    theta.bin              n_keep x q kept angles
    lambda.bin, delta.bin, kappa.bin, kept_iterations.bin
    model_calls.bin        model calls of every iteration (length n_s)
    a.bin, theta_true.bin  nominal angles and (when known) the truth
    mean.bin, std.bin      N x N posterior mean and standard deviation
    mean.pgm, std.pgm      16-bit previews
    hyper.csv, theta.csv   CSV mirrors of the scalar and angle chains
    diagnostics.csv        mean/std/MSJ/IACT/ESS per hyperparameter
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, dump_config
from .diagnostics import (
    angle_error,
    circular_mean,
    circular_std,
    cumulative_mean,
    posterior_image_stats,
    rel_error,
    summarize,
)
from .geometry import FanBeamGeometry
from .gibbs import GibbsChain, ProblemData, run
from .io import BundleError, read_array, read_json, write_array, write_csv, write_json, write_pgm16
from .phantoms import grains_phantom, nominal_angles, perturb_angles, ppower_phantom, simulate_sinogram
from .rng import substream

log = logging.getLogger(__name__)

CSV_MIRROR_LIMIT = 2_000_000  # largest theta chain (entries) mirrored to CSV
HYPER_NAMES = ("lambda", "delta", "kappa")


def _image(x, N):
    return np.asarray(x, dtype=np.float64).reshape((N, N), order="F")


def _mkdir(path) -> Path:
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise BundleError(f"cannot create output directory {path}: {exc.strerror}") from None
    return path


# ---------------------------------------------------------------------------
# data bundle
# ---------------------------------------------------------------------------


@dataclass
class DataBundle:
    geom: FanBeamGeometry
    a: np.ndarray
    b: np.ndarray
    x_true: np.ndarray | None
    theta_true: np.ndarray | None
    meta: dict

    @property
    def problem(self) -> ProblemData:
        return ProblemData(self.b, self.geom, self.a)


def make_phantom(cfg: RunConfig) -> np.ndarray:
    ph, N = cfg.phantom, cfg.geometry.N
    if ph.kind == "grains":
        return grains_phantom(N, ph.n_grains, seed=substream(ph.seed, "phantom"))
    return ppower_phantom(N, seed=substream(ph.seed, "phantom"), zero_fraction=ph.zero_fraction, power=ph.power)


def simulate(cfg: RunConfig, out_dir) -> Path:
    """Generate a phantom, perturbed angles and a noisy sinogram; write them."""
    out = _mkdir(out_dir)
    geom = cfg.geometry.build()
    d = cfg.data
    x_true = make_phantom(cfg)
    a = nominal_angles(d.angle_step_deg, d.span_deg)
    theta_true = perturb_angles(a, d.sigma_true_deg, seed=substream(d.seed, "angles"))
    truth = simulate_sinogram(x_true, theta_true, d.noise_level, geom, seed=substream(d.seed, "data"), a=a)
    S = truth.b.reshape((geom.p, a.size), order="F")

    write_array(out / "x_true.bin", _image(x_true, geom.N))
    write_array(out / "theta_true.bin", theta_true)
    write_array(out / "a.bin", a)
    write_array(out / "b.bin", S)
    pgm = {
        "x_true": write_pgm16(out / "x_true.pgm", _image(x_true, geom.N)),
        "sinogram": write_pgm16(out / "sinogram.pgm", S),
    }
    (out / "config.ini").write_text(dump_config(cfg))
    meta = {
        "bundle": "data",
        "version": __version__,
        "N": geom.N, "p": geom.p, "q": int(a.size), "m": int(truth.b.size), "d": geom.d,
        "geometry": {"dso": geom.dso, "dod": geom.dod, "det_len": geom.det_len, "fov": geom.fov,
                     "det_offset": geom.det_offset},
        "phantom": cfg.phantom.kind,
        "noise_level": d.noise_level,
        "sigma_true_deg": d.sigma_true_deg,
        "sigma_obs": truth.sigma_obs,
        "lambda_true": truth.lambda_true,
        "pgm_scaling": pgm,
    }
    write_json(out / "meta.json", meta)
    return out


def load_data(path) -> DataBundle:
    """Read a data bundle, checking array sizes against the metadata."""
    path = Path(path)
    if not path.is_dir():
        raise BundleError(f"data bundle {path} does not exist")
    meta = read_json(path / "meta.json")
    try:
        N, p, q = int(meta["N"]), int(meta["p"]), int(meta["q"])
        g = meta["geometry"]
        geom = FanBeamGeometry(g["dso"], g["dod"], g["det_len"], p, N, g["fov"], g.get("det_offset", 0.0))
    except (KeyError, TypeError, ValueError) as exc:
        raise BundleError(f"{path / 'meta.json'}: incomplete metadata ({exc})") from None
    S = read_array(path / "b.bin")
    a = read_array(path / "a.bin")
    if S.shape != (p, q):
        raise BundleError(f"b.bin has shape {S.shape}, metadata says {(p, q)}")
    if a.shape != (q,):
        raise BundleError(f"a.bin has shape {a.shape}, metadata says ({q},)")
    x_true = theta_true = None
    if (path / "x_true.bin").exists():
        X = read_array(path / "x_true.bin")
        if X.shape != (N, N):
            raise BundleError(f"x_true.bin has shape {X.shape}, metadata says {(N, N)}")
        x_true = X.ravel(order="F")
    if (path / "theta_true.bin").exists():
        theta_true = read_array(path / "theta_true.bin")
        if theta_true.shape != (q,):
            raise BundleError(f"theta_true.bin has shape {theta_true.shape}, metadata says ({q},)")
    return DataBundle(geom, a, S.ravel(order="F"), x_true, theta_true, meta)


# ---------------------------------------------------------------------------
# chain bundle
# ---------------------------------------------------------------------------


def hyper_diagnostics(chain_like: dict) -> list:
    """``ChainSummary`` rows for the scalar chains."""
    return [summarize(name, chain_like[name]) for name in HYPER_NAMES]


def _write_diagnostics(path, rows):
    write_csv(path, {
        "parameter": np.array([r.name for r in rows]),
        "mean": np.array([r.mean for r in rows]),
        "std": np.array([r.std for r in rows]),
        "msj": np.array([r.msj for r in rows]),
        "iact": np.array([r.iact for r in rows]),
        "n_ess": np.array([r.n_ess for r in rows]),
        "degenerate": np.array([int(r.degenerate) for r in rows]),
    })


def reconstruct(cfg: RunConfig, data: DataBundle, out_dir, progress=False) -> dict:
    """Run the sampler on a data bundle and write the chain bundle."""
    geom = cfg.geometry.build()
    if (geom.N, geom.p) != (data.geom.N, data.geom.p):
        raise BundleError(f"configuration expects N={geom.N}, p={geom.p}; "
                          f"data bundle has N={data.geom.N}, p={data.geom.p}")
    out = _mkdir(out_dir)
    t0 = time.perf_counter()
    chain = run(cfg.gibbs, data.problem, progress=progress)
    elapsed = time.perf_counter() - t0
    return write_chains(out, chain, data, cfg, elapsed=elapsed)


def write_chains(out, chain: GibbsChain, data: DataBundle, cfg: RunConfig | None = None, elapsed=None) -> dict:
    out = _mkdir(out)
    N, q = data.geom.N, data.a.size
    write_array(out / "x.bin", chain.x)
    write_array(out / "theta.bin", chain.theta)
    write_array(out / "lambda.bin", chain.lam)
    write_array(out / "delta.bin", chain.delta)
    write_array(out / "kappa.bin", chain.kappa)
    write_array(out / "kept_iterations.bin", chain.kept_iterations)
    write_array(out / "model_calls.bin", chain.model_calls)
    write_array(out / "a.bin", data.a)
    if data.theta_true is not None:
        write_array(out / "theta_true.bin", data.theta_true)

    meta = {
        "bundle": "chains",
        "version": __version__,
        "N": N, "p": data.geom.p, "q": q,
        "mode": "uncertain" if chain.config.get("sample_angles", True) else "fixed",
        "n_s": int(chain.model_calls.size),
        "n_keep": int(chain.n_records),
        "model_calls_total": int(chain.model_calls.sum()),
        "model_calls_per_iteration": int(chain.model_calls[0]) if chain.model_calls.size else 0,
        "theta_acceptance_mean": float(np.mean(chain.theta_acceptance_rate)) if chain.theta_proposals else None,
        "kappa_acceptance": chain.kappa_acceptance_rate if chain.kappa_proposals else None,
        "kappa_step_final": chain.kappa_step,
        "sampler": chain.config,
    }
    if elapsed is not None:
        meta["elapsed_s"] = elapsed

    if chain.n_records:
        write_csv(out / "hyper.csv", {"iteration": chain.kept_iterations, "lambda": chain.lam,
                                      "delta": chain.delta, "kappa": chain.kappa})
        if chain.theta.size <= CSV_MIRROR_LIMIT:
            cols = {"iteration": chain.kept_iterations}
            cols.update({f"theta_{i}": chain.theta[:, i] for i in range(q)})
            write_csv(out / "theta.csv", cols)
    if chain.n_records >= 2:
        mean, std = posterior_image_stats(chain.x)
        write_array(out / "mean.bin", _image(mean, N))
        write_array(out / "std.bin", _image(std, N))
        meta["pgm_scaling"] = {
            "mean": write_pgm16(out / "mean.pgm", _image(mean, N)),
            "std": write_pgm16(out / "std.pgm", _image(std, N)),
        }
        if data.x_true is not None:
            meta["eta"] = rel_error(mean, data.x_true)
        if data.theta_true is not None:
            tm = circular_mean(chain.theta)
            meta["angle_mae_deg"] = float(np.rad2deg(angle_error(tm, data.theta_true).mean()))
            meta["nominal_angle_mae_deg"] = float(np.rad2deg(angle_error(data.a, data.theta_true).mean()))
    if chain.n_records >= 10:
        rows = hyper_diagnostics({"lambda": chain.lam, "delta": chain.delta, "kappa": chain.kappa})
        _write_diagnostics(out / "diagnostics.csv", rows)
    if cfg is not None:
        (out / "config.ini").write_text(dump_config(cfg))
    write_json(out / "meta.json", meta)
    return meta


@dataclass
class ChainBundle:
    x: np.ndarray
    theta: np.ndarray
    lam: np.ndarray
    delta: np.ndarray
    kappa: np.ndarray
    kept_iterations: np.ndarray
    model_calls: np.ndarray
    a: np.ndarray
    theta_true: np.ndarray | None
    meta: dict


def load_chains(path) -> ChainBundle:
    path = Path(path)
    if not path.is_dir():
        raise BundleError(f"chain bundle {path} does not exist")
    meta = read_json(path / "meta.json")
    arrs = {name: read_array(path / f"{name}.bin") for name in
            ("x", "theta", "lambda", "delta", "kappa", "kept_iterations", "model_calls", "a")}
    n = arrs["lambda"].shape[0]
    q = arrs["a"].shape[0]
    if n == 0:
        raise BundleError(f"chain bundle {path} holds no kept samples")
    for name in ("delta", "kappa", "kept_iterations"):
        if arrs[name].shape != (n,):
            raise BundleError(f"{name}.bin has shape {arrs[name].shape}, expected ({n},)")
    if arrs["theta"].shape != (n, q):
        raise BundleError(f"theta.bin has shape {arrs['theta'].shape}, expected {(n, q)}")
    if arrs["x"].ndim != 2 or arrs["x"].shape[0] != n:
        raise BundleError(f"x.bin has shape {arrs['x'].shape}, expected ({n}, d)")
    tt = path / "theta_true.bin"
    return ChainBundle(arrs["x"], arrs["theta"], arrs["lambda"], arrs["delta"], arrs["kappa"],
                       arrs["kept_iterations"], arrs["model_calls"], arrs["a"],
                       read_array(tt) if tt.exists() else None, meta)


def report(path, stream=None) -> dict:
    """Summarize a chain bundle; writes ``angles.csv`` and ``cumulative.csv``."""
    path = Path(path)
    cb = load_chains(path)
    if cb.lam.size < 10:
        raise BundleError(f"chain bundle {path} has {cb.lam.size} kept samples; need at least 10 for diagnostics")
    rows = hyper_diagnostics({"lambda": cb.lam, "delta": cb.delta, "kappa": cb.kappa})

    angle_cols = {
        "index": np.arange(cb.a.size),
        "nominal": cb.a,
        "mean": circular_mean(cb.theta),
        "std": circular_std(cb.theta),
    }
    if cb.theta_true is not None:
        angle_cols["true"] = cb.theta_true
    write_csv(path / "angles.csv", angle_cols)
    cm = cumulative_mean(np.column_stack([cb.lam, cb.delta, cb.kappa]))
    write_csv(path / "cumulative.csv", {"iteration": cb.kept_iterations, "lambda": cm[:, 0],
                                        "delta": cm[:, 1], "kappa": cm[:, 2]})

    lines = [f"chain bundle: {path}",
             f"mode: {cb.meta.get('mode', '?')}   kept samples: {cb.lam.size}   "
             f"model calls: {int(cb.model_calls.sum())}",
             f"{'param':<8}{'mean':>12}{'std':>12}{'MSJ':>12}{'IACT':>10}{'n_ESS':>8}"]
    for r in rows:
        lines.append(f"{r.name:<8}{r.mean:>12.5g}{r.std:>12.5g}{r.msj:>12.5g}{r.iact:>10.3f}{r.n_ess:>8.0f}"
                     + ("  (constant)" if r.degenerate else ""))
    for key in ("eta", "angle_mae_deg", "nominal_angle_mae_deg"):
        if key in cb.meta:
            lines.append(f"{key}: {cb.meta[key]:.6g}")
    text = "\n".join(lines)
    if stream is not None:
        print(text, file=stream)
    return {"rows": rows, "angles": angle_cols, "text": text}
