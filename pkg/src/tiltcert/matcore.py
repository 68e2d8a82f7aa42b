"""Dense complex linear algebra for 2-, 4- and 36-dimensional operators.

Everything here works on plain numpy arrays. Validation helpers
(:func:`as_hermitian`, :func:`as_density`) are used at module boundaries to
enforce the usual invariants; the numerical kernels themselves accept any
stack of square matrices.

The Hermitian eigensolver is a cyclic Jacobi method vectorised over a leading
batch axis. Rotations are decided per matrix, so the result for one matrix
does not depend on what else is in the batch.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Optional, Sequence

import numpy as np

HERMITIAN_TOL = 1e-12
DENSITY_TOL = 1e-10
JACOBI_TOL = 1e-14
JACOBI_MAX_SWEEPS = 60

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (I2, X, Y, Z)


class NotHermitianError(ValueError):
    pass


class NotDensityError(ValueError):
    pass


@dataclass(frozen=True)
class Spectrum:
    """Ascending eigenvalues, optionally with eigenvectors as columns."""

    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray] = None

    @property
    def min(self) -> float:
        return float(self.eigenvalues[..., 0]) if self.eigenvalues.ndim == 1 else self.eigenvalues[..., 0]

    @property
    def max(self) -> float:
        return float(self.eigenvalues[..., -1]) if self.eigenvalues.ndim == 1 else self.eigenvalues[..., -1]


def _check_square(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise ValueError(f"expected square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def as_hermitian(m, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return (M + M†)/2, rejecting inputs that are not Hermitian within ``tol``."""
    m = _check_square(m)
    mh = np.conj(np.swapaxes(m, -1, -2))
    dev = np.max(np.abs(m - mh)) if m.size else 0.0
    if dev > tol:
        raise NotHermitianError(f"matrix deviates from Hermitian by {dev:.3e}")
    return (m + mh) / 2


def as_density(m, tol: float = DENSITY_TOL) -> np.ndarray:
    rho = as_hermitian(m)
    tr = np.trace(rho).real
    if abs(tr - 1) > tol:
        raise NotDensityError(f"trace {tr!r} differs from 1")
    lo = eig_hermitian(rho).eigenvalues[0]
    if lo < -tol:
        raise NotDensityError(f"negative eigenvalue {lo:.3e}")
    return rho


def tensor(*ops) -> np.ndarray:
    """Kronecker product with the first factor outermost."""
    if not ops:
        raise ValueError("tensor() needs at least one operand")
    return reduce(np.kron, ops)


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def hs_inner(a, b) -> complex:
    """Hilbert-Schmidt inner product tr(A† B)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return complex(np.sum(np.conj(a) * b))


def ket_to_dm(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    return np.outer(psi, psi.conj())


def partial_trace(m, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Trace out every subsystem not listed in ``keep``.

    ``dims`` lists subsystem dimensions with the first subsystem outermost,
    matching :func:`tensor`. Kept subsystems stay in their original order.
    """
    m = np.asarray(m)
    dims = [int(d) for d in dims]
    n = len(dims)
    if int(np.prod(dims)) != m.shape[-1] or m.shape[-1] != m.shape[-2]:
        raise ValueError(f"dims {dims} inconsistent with matrix of shape {m.shape}")
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= n for k in keep):
        raise ValueError(f"keep indices {keep} out of range for {n} subsystems")
    t = m.reshape(dims + dims)
    # einsum letters: row indices then column indices; traced pairs share a letter
    letters = "abcdefghijklmnopqrstuvwxyz"
    rows = list(letters[:n])
    cols = [letters[n + i] if i in keep else rows[i] for i in range(n)]
    out = "".join(rows[i] for i in keep) + "".join(cols[i] for i in keep)
    res = np.einsum("".join(rows) + "".join(cols) + "->" + out, t)
    d = int(np.prod([dims[i] for i in keep])) if keep else 1
    return res.reshape(d, d)


def permute_subsystems(m, dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors of an operator: new factor k is old factor ``order[k]``."""
    m = np.asarray(m)
    n = len(dims)
    t = m.reshape(list(dims) * 2)
    perm = list(order) + [n + o for o in order]
    d = m.shape[-1]
    return t.transpose(perm).reshape(d, d)


def fidelity_with_pure(rho, phi) -> float:
    """Fidelity between a state and a pure state, equal to ⟨ρ, φ⟩."""
    phi = np.asarray(phi)
    purity = hs_inner(phi, phi).real
    if abs(purity - 1) > DENSITY_TOL:
        raise NotDensityError(f"target is not pure (tr φ² = {purity!r})")
    return hs_inner(rho, phi).real


_TINY = 1e-290


def _rotate(a, v, p, q, active, cplx):
    # Annihilate a[p, q] in every active matrix; inactive ones get t = 0,
    # which is an exact no-op on their entries. Layout is (n, n, batch).
    apq = a[p, q].copy()
    r = np.abs(apq)
    # entries this small are zero for every purpose here; rotating on them
    # would overflow the phase computation
    nz = (r > _TINY) & active
    rs = np.where(nz, r, 1.0)
    app = a[p, p].real.copy()
    aqq = a[q, q].real.copy()
    with np.errstate(over="ignore"):
        theta = (aqq - app) / (2 * rs)
        t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.sqrt(theta * theta + 1))
    t = np.where(nz, t, 0.0)
    c = 1 / np.sqrt(t * t + 1)
    s = t * c
    # unit phase e with conj(e) * apq = |apq|
    e = np.where(nz, apq / rs, 1.0)
    if cplx:
        ec = np.conj(e)
        se, sec, ce, cec = s * e, s * ec, c * e, c * ec
    else:
        se = sec = s * e
        ce = cec = c * e
    colp = a[:, p].copy()
    colq = a[:, q]
    a[:, p] = c * colp - sec * colq
    a[:, q] = s * colp + cec * colq
    rowp = a[p].copy()
    rowq = a[q]
    a[p] = c * rowp - se * rowq
    a[q] = s * rowp + ce * rowq
    a[p, p] = np.where(nz, app - t * r, app)
    a[q, q] = np.where(nz, aqq + t * r, aqq)
    a[p, q] = np.where(nz, 0.0, a[p, q])
    a[q, p] = np.where(nz, 0.0, a[q, p])
    if v is not None:
        vp = v[:, p].copy()
        vq = v[:, q]
        v[:, p] = c * vp - sec * vq
        v[:, q] = s * vp + cec * vq


def _offdiag_norm(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    tot = np.zeros(a.shape[-1])
    for i in range(n):
        for j in range(n):
            if i != j:
                tot += np.abs(a[i, j]) ** 2
    return np.sqrt(tot)


def jacobi_eigh(m, vectors: bool = False, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Cyclic Jacobi diagonalisation of a stack of Hermitian matrices.

    Accepts shape (..., n, n), real symmetric or complex Hermitian; the input
    is assumed Hermitian (no symmetrisation here). A matrix stops rotating once
    its off-diagonal Frobenius norm drops to ``tol * max(1, ||M||_F)``.

    Returns ascending eigenvalues of shape (..., n) and, if requested,
    eigenvectors as columns (..., n, n).
    """
    m = np.asarray(m)
    n = m.shape[-1]
    batch = m.shape[:-2]
    dtype = np.result_type(m.dtype, np.float64)
    # always copy: for a single matrix the moved view can already count as contiguous
    a = np.array(np.moveaxis(m.reshape((-1, n, n)), 0, -1), dtype=dtype, order="C", copy=True)
    nb = a.shape[-1]
    cplx = np.iscomplexobj(a)
    v = None
    if vectors:
        v = np.zeros((n, n, nb), dtype=dtype)
        for i in range(n):
            v[i, i] = 1
    scale = np.maximum(1.0, np.sqrt(np.sum(np.abs(a) ** 2, axis=(0, 1))))
    thresh = tol * scale
    for _ in range(max_sweeps):
        active = _offdiag_norm(a) > thresh
        if not active.any():
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                _rotate(a, v, p, q, active, cplx)
    else:
        if (_offdiag_norm(a) > thresh).any():
            raise RuntimeError("Jacobi iteration did not converge")
    w = np.stack([a[i, i].real for i in range(n)], axis=-1)
    order = np.argsort(w, axis=-1, kind="stable")
    w = np.take_along_axis(w, order, axis=-1).reshape(batch + (n,))
    if not vectors:
        return w, None
    v = np.moveaxis(v, -1, 0)
    v = np.take_along_axis(v, order[:, None, :], axis=-1)
    return w, v.reshape(batch + (n, n))


def eig_hermitian(m, vectors: bool = False) -> Spectrum:
    """Spectrum of a single Hermitian matrix (validated and symmetrised)."""
    h = as_hermitian(m)
    w, v = jacobi_eigh(h, vectors=vectors)
    return Spectrum(w, v)


def eigvalsh_batch(m) -> np.ndarray:
    """Ascending eigenvalues of a stack of Hermitian matrices, no validation."""
    return jacobi_eigh(m)[0]


def lambda_min(m) -> float:
    return float(eig_hermitian(m).eigenvalues[0])


def op_norm(m) -> float:
    """Operator (spectral) norm of a Hermitian matrix."""
    w = eig_hermitian(m).eigenvalues
    return float(max(abs(w[0]), abs(w[-1])))


def pauli_coefficients(m) -> np.ndarray:
    """Real coefficients c_ij with M = 1/4 Σ c_ij σ_i ⊗ σ_j for Hermitian 4×4 M.

    Works on stacks (..., 4, 4) as well.
    """
    m = np.asarray(m)
    basis = PAULI_PRODUCTS.reshape(16, 4, 4)
    c = np.einsum("kji,...ij->...k", basis, m).real
    return c.reshape(m.shape[:-2] + (4, 4))


def from_pauli_coefficients(c) -> np.ndarray:
    c = np.asarray(c)
    return 0.25 * np.einsum("...ij,ijkl->...kl", c, PAULI_PRODUCTS)


PAULI_PRODUCTS = np.array([[np.kron(a, b) for b in PAULIS] for a in PAULIS])
