import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tiltcert import bell
from tiltcert.matcore import I2, X, Z, eig_hermitian, hs_inner, partial_trace, tensor

ALPHAS = [0.0, 0.5, 1.0, 1.5, 1.9]
alphas = st.floats(0, 1.999)
angles = st.floats(0, np.pi / 2)


def test_alpha_range():
    for bad in (-0.1, 2.0, 2.5):
        with pytest.raises(ValueError):
            bell.check_alpha(bad)
    with pytest.raises(ValueError):
        bell.BellRealization(0.0, -0.1, 0.0)
    with pytest.raises(ValueError):
        bell.BellRealization(0.0, 0.0, 1.6)


def test_observable_examples():
    assert np.allclose(bell.observable(0, 0), X)
    assert np.allclose(bell.observable(np.pi / 2, 1), -Z)
    assert np.allclose(bell.observable(np.pi / 4, 0), (X + Z) / np.sqrt(2))
    with pytest.raises(ValueError):
        bell.observable(0.1, 2)


@given(angles, st.sampled_from([0, 1]))
def test_observable_squares_to_identity(a, r):
    o = bell.observable(a, r)
    assert np.allclose(o @ o, I2, atol=1e-14)


def test_values():
    assert bell.classical_value(0) == 2
    assert np.isclose(bell.quantum_value(0), 2 * np.sqrt(2))
    assert bell.classical_value(1) == 3
    assert np.isclose(bell.quantum_value(1), np.sqrt(10))
    assert np.isclose(bell.quantum_value(1.9999999), 4, atol=1e-6)


def test_optimal_angles():
    a, b = bell.optimal_angles(0)
    assert np.isclose(a, np.pi / 4) and np.isclose(b, np.pi / 4)
    assert bell.optimal_angles(1.9999999)[1] < 1e-3


def test_operator_examples():
    w = bell.bell_operator(bell.BellRealization(0, 0, 0))
    assert np.allclose(w, 2 * tensor(X, X))
    assert np.allclose(eig_hermitian(w).eigenvalues, [-2, -2, 2, 2])
    # at the CHSH optimum the operator is XX + XZ + ZX - ZZ up to scaling: spectrum {-2√2, 0, 0, 2√2}
    w = bell.bell_operator(bell.BellRealization(0, np.pi / 4, np.pi / 4))
    r = 2 * np.sqrt(2)
    assert np.allclose(eig_hermitian(w).eigenvalues, [-r, 0, 0, r], atol=1e-13)


@settings(max_examples=100)
@given(alphas, angles, angles)
def test_batch_operator_matches_definition(alpha, a, b):
    w = bell.bell_operator(bell.BellRealization(alpha, a, b))
    assert np.allclose(bell.bell_operator_batch(alpha, a, b), w, atol=1e-13)
    assert eig_hermitian(w).max <= alpha + 4 + 1e-12


@settings(max_examples=50)
@given(alphas, st.floats(0, np.pi / 2 - 1e-3), angles)
def test_operator_lipschitz(alpha, a, b):
    d = 1e-3
    w1 = bell.bell_operator(bell.BellRealization(alpha, a, b))
    w2 = bell.bell_operator(bell.BellRealization(alpha, a + d, b))
    assert np.abs(eig_hermitian(w1 - w2).eigenvalues).max() <= (alpha + 4) * d


def test_expectation_below_top_eigenvalue(rng):
    for _ in range(50):
        alpha, a, b = rng.uniform(0, 2), *rng.uniform(0, np.pi / 2, 2)
        w = bell.bell_operator(bell.BellRealization(alpha, a, b))
        g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        rho = g @ g.conj().T
        rho /= np.trace(rho)
        assert hs_inner(w, rho).real <= eig_hermitian(w).max + 1e-12


@pytest.mark.parametrize("alpha", ALPHAS)
def test_optimal_state(alpha):
    phi = bell.optimal_state(alpha)
    assert np.isclose(np.trace(phi).real, 1)
    assert np.isclose(hs_inner(phi, phi).real, 1)
    w = bell.bell_operator(bell.BellRealization(alpha, *bell.optimal_angles(alpha)))
    assert abs(hs_inner(w, phi).real - bell.quantum_value(alpha)) < 1e-10
    # Φ_α is the top eigenvector of the optimal Bell operator
    assert np.allclose(w @ phi, bell.quantum_value(alpha) * phi, atol=1e-12)
    th = bell.theta(alpha)
    marg = eig_hermitian(partial_trace(phi, [2, 2], [0])).eigenvalues
    assert np.allclose(marg, sorted([np.cos(th) ** 2, np.sin(th) ** 2]), atol=1e-12)
    assert np.isclose(np.sin(2 * th), np.sqrt((4 - alpha**2) / (4 + alpha**2)))
    assert np.isclose(np.cos(2 * th), np.sqrt(2 * alpha**2 / (4 + alpha**2)))


def test_maximally_entangled_at_zero():
    assert np.isclose(bell.largest_schmidt_sq(0), 0.5)
    assert np.allclose(partial_trace(bell.optimal_state(0), [2, 2], [1]), I2 / 2)
