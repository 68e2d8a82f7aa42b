import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tiltcert import matcore as mc
from tiltcert.matcore import I2, X, Y, Z

from conftest import random_hermitian

PHI_PLUS = mc.ket_to_dm(np.array([1, 0, 0, 1]) / np.sqrt(2))


def test_tensor_examples():
    assert np.allclose(mc.tensor(I2, I2), np.eye(4))
    assert np.allclose(mc.tensor(Z, Z), np.diag([1, -1, -1, 1]))
    ket00 = np.array([1, 0, 0, 0])
    assert np.allclose(mc.tensor(X, X) @ ket00, [0, 0, 0, 1])


def test_tensor_needs_operands():
    with pytest.raises(ValueError):
        mc.tensor()


finite = st.floats(-3, 3, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(arrays(float, (3, 2, 2, 2), elements=finite), st.floats(-2, 2))
def test_tensor_associative_and_bilinear(parts, c):
    a, b, d = (p[0] + 1j * p[1] for p in parts)
    assert np.allclose(mc.tensor(mc.tensor(a, b), d), mc.tensor(a, mc.tensor(b, d)), atol=1e-12)
    assert np.allclose(mc.tensor(a + c * d, b), mc.tensor(a, b) + c * mc.tensor(d, b), atol=1e-12)


def test_hs_inner_examples():
    assert mc.hs_inner(I2, I2) == 2
    assert mc.hs_inner(X, Z) == 0
    assert np.isclose(mc.hs_inner(PHI_PLUS, PHI_PLUS), 1)
    with pytest.raises(ValueError):
        mc.hs_inner(I2, np.eye(4))


def test_hs_inner_is_squared_frobenius(rng):
    a = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    v = mc.hs_inner(a, a)
    assert v.real >= 0 and abs(v.imag) < 1e-14
    assert np.isclose(v.real, np.linalg.norm(a) ** 2)


def test_as_hermitian_symmetrises_and_rejects():
    m = np.array([[1, 1e-13], [0, 2]], dtype=complex)
    h = mc.as_hermitian(m)
    assert np.allclose(h, h.conj().T, atol=0)
    with pytest.raises(mc.NotHermitianError):
        mc.as_hermitian(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValueError):
        mc.as_hermitian(np.array([[np.nan, 0], [0, 1]]))
    with pytest.raises(ValueError):
        mc.as_hermitian(np.zeros((2, 3)))


def test_as_density_checks():
    assert np.allclose(mc.as_density(PHI_PLUS), PHI_PLUS)
    with pytest.raises(mc.NotDensityError):
        mc.as_density(np.eye(2))
    with pytest.raises(mc.NotDensityError):
        mc.as_density(np.diag([1.5, -0.5]))


def test_partial_trace_examples(rng):
    assert np.allclose(mc.partial_trace(PHI_PLUS, [2, 2], [0]), I2 / 2)
    ra = mc.ket_to_dm([0.6, 0.8j])
    rb = np.diag([0.3, 0.7])
    prod = np.kron(ra, rb)
    assert np.allclose(mc.partial_trace(prod, [2, 2], [0]), ra)
    assert np.allclose(mc.partial_trace(prod, [2, 2], [1]), rb)
    assert np.allclose(mc.partial_trace(prod, [2, 2], []), [[1]])
    with pytest.raises(ValueError):
        mc.partial_trace(prod, [2, 3], [0])
    with pytest.raises(ValueError):
        mc.partial_trace(prod, [2, 2], [2])


def test_partial_trace_matches_explicit_sum_and_keeps_trace(rng):
    m = random_hermitian(rng, 12)
    dims = [3, 2, 2]
    t = m.reshape(dims * 2)
    want = np.einsum("abcdbf->acdf", t).reshape(6, 6)  # trace out the middle factor
    got = mc.partial_trace(m, dims, [0, 2])
    assert np.allclose(got, want)
    assert np.isclose(np.trace(got), np.trace(m))


def test_partial_trace_does_not_modify_input():
    m = np.kron(I2, np.diag([0.25, 0.75])).astype(complex)
    before = m.copy()
    mc.partial_trace(m, [2, 2], [0])
    assert np.array_equal(m, before)


def test_permute_subsystems(rng):
    a = random_hermitian(rng, 3)
    b = random_hermitian(rng, 2)
    c = random_hermitian(rng, 2)
    m = mc.tensor(a, b, c)
    assert np.allclose(mc.permute_subsystems(m, [3, 2, 2], [2, 0, 1]), mc.tensor(c, a, b))


def test_fidelity_with_pure():
    assert np.isclose(mc.fidelity_with_pure(PHI_PLUS, PHI_PLUS), 1)
    assert np.isclose(mc.fidelity_with_pure(np.eye(4) / 4, PHI_PLUS), 0.25)
    assert np.isclose(mc.fidelity_with_pure(mc.ket_to_dm([1, 0, 0, 0]), PHI_PLUS), 0.5)
    with pytest.raises(mc.NotDensityError):
        mc.fidelity_with_pure(PHI_PLUS, np.eye(4) / 4)


def test_eig_examples():
    assert np.allclose(mc.eig_hermitian(Z).eigenvalues, [-1, 1])
    assert np.allclose(mc.eig_hermitian(np.eye(4)).eigenvalues, [1, 1, 1, 1])
    with pytest.raises(mc.NotHermitianError):
        mc.eig_hermitian(np.array([[0, 1], [0, 0]]))


def test_chsh_operator_spectrum():
    # W² = 4·1 + 4·Y⊗Y, so the spectrum is {-2√2, 0, 0, 2√2}
    w = mc.tensor(X, X) + mc.tensor(X, Z) + mc.tensor(Z, X) - mc.tensor(Z, Z)
    assert np.allclose(w @ w, 4 * np.eye(4) + 4 * mc.tensor(Y, Y))
    r = 2 * np.sqrt(2)
    assert np.allclose(mc.eig_hermitian(w).eigenvalues, [-r, 0, 0, r], atol=1e-13)


@pytest.mark.parametrize("d,n", [(2, 4000), (4, 4000), (36, 2000)])
def test_jacobi_against_lapack(rng, d, n):
    m = random_hermitian(rng, d, n)
    w, v = mc.jacobi_eigh(m, vectors=True)
    ref = np.linalg.eigvalsh(m)
    scale = np.maximum(1, np.abs(m).max(axis=(1, 2)))
    assert np.all(np.abs(w - ref).max(axis=1) <= 1e-12 * scale)
    recon = v @ (w[..., None] * np.conj(np.swapaxes(v, -1, -2)))
    assert np.all(np.abs(m - recon).max(axis=(1, 2)) <= 1e-11 * scale)
    ortho = np.conj(np.swapaxes(v, -1, -2)) @ v - np.eye(d)
    assert np.abs(ortho).max() <= 1e-10
    assert np.all(np.diff(w, axis=1) >= 0)


def test_jacobi_real_input(rng):
    m = random_hermitian(rng, 4, 500).real
    w, _ = mc.jacobi_eigh(m)
    assert np.allclose(w, np.linalg.eigvalsh(m), atol=1e-13)


def test_jacobi_is_batch_independent(rng):
    m = random_hermitian(rng, 4, 300)
    full = mc.jacobi_eigh(m)[0]
    part = mc.jacobi_eigh(m[17:40])[0]
    single = mc.jacobi_eigh(m[25])[0]
    assert np.array_equal(full[17:40], part)
    assert np.array_equal(full[25], single)


def test_jacobi_leaves_input_untouched(rng):
    m = random_hermitian(rng, 4)
    before = m.copy()
    mc.jacobi_eigh(m, vectors=True)
    assert np.array_equal(m, before)


def test_lambda_min_and_norm():
    assert np.isclose(mc.lambda_min(np.diag([3.0, -2.0])), -2)
    assert np.isclose(mc.op_norm(np.diag([1.0, -5.0])), 5)


def test_pauli_roundtrip(rng):
    m = random_hermitian(rng, 4, 10)
    c = mc.pauli_coefficients(m)
    assert np.allclose(mc.from_pauli_coefficients(c), m)
    assert np.allclose(mc.pauli_coefficients(PHI_PLUS), np.diag([1, 1, -1, 1]))
