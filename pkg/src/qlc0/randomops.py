"""Random operators for tests, sweeps and planted instances."""

from __future__ import annotations

import numpy as np


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def ginibre(dim: int, seed=None) -> np.ndarray:
    rng = _rng(seed)
    return (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)


def random_unitary(dim: int, seed=None) -> np.ndarray:
    """Haar-random unitary via QR with the phase fix."""
    z = ginibre(dim, seed)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_hermitian(dim: int, seed=None) -> np.ndarray:
    g = ginibre(dim, seed)
    return 0.5 * (g + g.conj().T)


def random_contraction(dim: int, seed=None, norm: float | None = None) -> np.ndarray:
    """Random operator with spectral norm ``norm`` (uniform in (0, 1] if omitted)."""
    rng = _rng(seed)
    g = ginibre(dim, rng)
    target = rng.uniform(0.05, 1.0) if norm is None else norm
    return g * (target / np.linalg.svd(g, compute_uv=False)[0])


def random_density(dim: int, seed=None, rank: int | None = None) -> np.ndarray:
    rng = _rng(seed)
    rank = dim if rank is None else rank
    g = (rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank)))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_pure_state(dim: int, seed=None) -> np.ndarray:
    rng = _rng(seed)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)
