"""Random states, isometries and channels for property checks and search restarts.

All samplers take a ``numpy.random.Generator`` and a leading batch size, so a
block of samples is drawn in one call.
"""

from __future__ import annotations

import numpy as np


def ginibre(rng: np.random.Generator, shape) -> np.ndarray:
    """Complex Gaussian matrices with i.i.d. standard normal real and imaginary parts."""
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def haar_isometry(rng: np.random.Generator, n: int, d_out: int, d_in: int) -> np.ndarray:
    """``n`` Haar-random isometries C^d_in → C^d_out, shape (n, d_out, d_in).

    QR of a Ginibre matrix with the phases of R's diagonal absorbed into Q.
    """
    if d_out < d_in:
        raise ValueError(f"an isometry needs d_out >= d_in, got {d_out} < {d_in}")
    g = ginibre(rng, (n, d_out, d_in))
    q, r = np.linalg.qr(g)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (d / np.abs(d))[:, None, :]


def haar_unitary(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    return haar_isometry(rng, n, d, d)


def haar_pure_states(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    """``n`` Haar-random unit vectors in C^d, shape (n, d)."""
    v = ginibre(rng, (n, d))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def random_density(rng: np.random.Generator, n: int, d: int, rank=None) -> np.ndarray:
    """Density matrices from partial traces of Haar-random pure states on C^d ⊗ C^k.

    ``rank`` is the ancilla dimension k (default d, giving the Hilbert-Schmidt
    measure); k = 1 gives pure states.
    """
    k = d if rank is None else int(rank)
    psi = haar_pure_states(rng, n, d * k).reshape(n, d, k)
    return psi @ np.conj(np.swapaxes(psi, -1, -2))


def random_kraus(rng: np.random.Generator, n: int, d_in: int, d_out: int, kraus_count: int) -> np.ndarray:
    """Kraus sets of Stinespring channels, shape (n, kraus_count, d_out, d_in).

    A Haar isometry C^d_in → C^kraus_count ⊗ C^d_out is cut into blocks.
    """
    v = haar_isometry(rng, n, kraus_count * d_out, d_in)
    return v.reshape(n, kraus_count, d_out, d_in)


def apply_kraus(kraus: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Σ_e K_e ρ K_e† over batched Kraus sets (..., e, d_out, d_in) and inputs (..., d_in, d_in)."""
    return np.einsum("...eab,...bc,...edc->...ad", kraus, rho, np.conj(kraus))


def random_hermitian(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    g = ginibre(rng, (n, d, d))
    return 0.5 * (g + np.conj(np.swapaxes(g, -1, -2)))
