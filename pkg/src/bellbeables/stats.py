"""Distribution comparisons shared by the lattice and continuum engines."""

from __future__ import annotations

import numpy as np

RNG_ALGORITHM = "numpy.random.Philox (SeedSequence-derived 64-bit keys)"


def total_variation(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return 0.5 * float(np.abs(p - q).sum())


def empirical_distribution(labels, n_bins: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64).ravel()
    if labels.size == 0:
        raise ValueError("empty sample")
    return np.bincount(labels, minlength=n_bins) / labels.size


def multinomial_tv_band(
    target, n_samples: int, level: float = 0.95, draws: int = 4000, seed: int = 0
) -> float:
    """Quantile of the TV distance between ``target`` and an ``n_samples`` multinomial draw from it.

    This is the sampling-noise band: an exact sampler exceeds it with
    probability ``1 - level``.
    """
    target = np.clip(np.asarray(target, dtype=float), 0.0, None)
    target = target / target.sum()
    rng = np.random.Generator(np.random.Philox(seed))
    counts = rng.multinomial(n_samples, target, size=draws)
    tv = 0.5 * np.abs(counts / n_samples - target[None, :]).sum(axis=1)
    return float(np.quantile(tv, level))


def derive_seed(master_seed: int, index: int) -> int:
    """64-bit child seed for stream ``index`` of ``master_seed``."""
    ss = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def generator(seed: int, *subkey: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *subkey])))
