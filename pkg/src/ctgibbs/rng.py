"""Seeded random streams.

All randomness goes through numpy's PCG64 bit generator.  Each Gibbs
conditional draws from its own substream, derived from the run seed with a
fixed spawn key, so changing how many numbers one conditional consumes does
not shift the others.
"""
from __future__ import annotations

import numpy as np

STREAMS = {
    "x": 0,
    "theta": 1,
    "lambda": 2,
    "delta": 3,
    "kappa": 4,
    "data": 5,
    "phantom": 6,
    "angles": 7,
}


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for the named consumer of a run seed."""
    try:
        key = STREAMS[name]
    except KeyError:
        raise KeyError(f"unknown stream {name!r}; known: {sorted(STREAMS)}") from None
    ss = np.random.SeedSequence(int(seed), spawn_key=(key,))
    return np.random.Generator(np.random.PCG64(ss))


def randn_vec(n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 0:
        raise ValueError("n must be non-negative")
    return rng.standard_normal(int(n))


def gamma_sample(shape: float, rate: float, rng: np.random.Generator, size=None):
    """Gamma draw(s) in the shape/rate parameterization."""
    if not (shape > 0 and rate > 0):
        raise ValueError(f"gamma parameters must be positive (shape={shape!r}, rate={rate!r})")
    return rng.gamma(shape, 1.0 / rate, size=size)
