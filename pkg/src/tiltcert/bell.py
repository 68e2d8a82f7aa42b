"""Tilted CHSH Bell operators and their optimal two-qubit realisation.

Observables live in the 2×2 Jordan-block parametrisation: each party measures
``cos(angle) X ± sin(angle) Z``. Functions taking angle arrays broadcast, which
is what the grid scan relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matcore import I2, X, Y, Z, tensor

ALPHA_MAX = 2.0
HALF_PI = np.pi / 2


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (0 <= alpha < ALPHA_MAX):
        raise ValueError(f"tilt parameter alpha must lie in [0, 2), got {alpha!r}")
    return alpha


def _check_angle(angle: float, name: str = "angle") -> float:
    angle = float(angle)
    if not (0 <= angle <= HALF_PI):
        raise ValueError(f"{name} must lie in [0, pi/2], got {angle!r}")
    return angle


@dataclass(frozen=True)
class BellRealization:
    alpha: float
    a: float
    b: float

    def __post_init__(self):
        check_alpha(self.alpha)
        _check_angle(self.a, "a")
        _check_angle(self.b, "b")


def observable(angle: float, r: int) -> np.ndarray:
    """cos(angle) X + (-1)^r sin(angle) Z."""
    angle = _check_angle(angle)
    if r not in (0, 1):
        raise ValueError(f"r must be 0 or 1, got {r!r}")
    sign = 1.0 if r == 0 else -1.0
    return np.cos(angle) * X + sign * np.sin(angle) * Z


def bell_operator(real: BellRealization) -> np.ndarray:
    """W_alpha = alpha A0⊗1 + A0⊗(B0 + B1) + A1⊗(B0 - B1) as a 4×4 matrix."""
    a0, a1 = observable(real.a, 0), observable(real.a, 1)
    b0, b1 = observable(real.b, 0), observable(real.b, 1)
    return real.alpha * tensor(a0, I2) + tensor(a0, b0 + b1) + tensor(a1, b0 - b1)


_XI = np.kron(X, I2).real
_ZI = np.kron(Z, I2).real
_XX = np.kron(X, X).real
_XZ = np.kron(X, Z).real
_ZX = np.kron(Z, X).real
_ZZ = np.kron(Z, Z).real


def bell_operator_batch(alpha: float, a, b) -> np.ndarray:
    """Real 4×4 Bell operators for broadcast angle arrays, shape (..., 4, 4).

    Written out term by term in the Pauli expansion; agrees with
    :func:`bell_operator` up to rounding.
    """
    a = np.asarray(a, dtype=float)[..., None, None]
    b = np.asarray(b, dtype=float)[..., None, None]
    ca, sa, cb, sb = np.cos(a), np.sin(a), np.cos(b), np.sin(b)
    return (
        alpha * (ca * _XI + sa * _ZI)
        + 2 * ca * cb * _XX
        + 2 * ca * sb * _XZ
        + 2 * sa * cb * _ZX
        - 2 * sa * sb * _ZZ
    )


def classical_value(alpha: float) -> float:
    return 2.0 + check_alpha(alpha)


def quantum_value(alpha: float) -> float:
    alpha = check_alpha(alpha)
    return float(np.sqrt(8 + 2 * alpha**2))


def theta(alpha: float) -> float:
    """Schmidt angle of the optimal state."""
    alpha = check_alpha(alpha)
    return 0.5 * float(np.arcsin(np.sqrt((4 - alpha**2) / (4 + alpha**2))))


def optimal_angles(alpha: float) -> tuple[float, float]:
    alpha = check_alpha(alpha)
    return np.pi / 4, float(np.arcsin(np.sqrt((4 - alpha**2) / 8)))


def optimal_state_coefficients(alpha: float) -> np.ndarray:
    """Pauli coefficients c_ij of the optimal state, Φ = 1/4 Σ c_ij σ_i⊗σ_j.

    Index order is (I, X, Y, Z) on each side.
    """
    alpha = check_alpha(alpha)
    cos2 = np.sqrt(2 * alpha**2 / (4 + alpha**2))
    sin2 = np.sqrt((4 - alpha**2) / (4 + alpha**2))
    r = 1 / np.sqrt(2)
    c = np.zeros((4, 4))
    c[0, 0] = 1.0
    # cos2θ [(X+Z)/√2 ⊗ 1 + 1 ⊗ X]
    c[1, 0] = c[3, 0] = cos2 * r
    c[0, 1] = cos2
    # (X+Z)/√2 ⊗ X
    c[1, 1] = r
    c[3, 1] = r
    # sin2θ [Y⊗Y + (X-Z)/√2 ⊗ Z]
    c[2, 2] = sin2
    c[1, 3] = sin2 * r
    c[3, 3] = -sin2 * r
    return c


def optimal_state(alpha: float) -> np.ndarray:
    """Density matrix Φ_alpha built from its Pauli expansion."""
    c = optimal_state_coefficients(alpha)
    paulis = (I2, X, Y, Z)
    out = np.zeros((4, 4), dtype=complex)
    for i in range(4):
        for j in range(4):
            if c[i, j] != 0:
                out += c[i, j] * np.kron(paulis[i], paulis[j])
    return out / 4


def largest_schmidt_sq(alpha: float) -> float:
    """λ0² = cos²θ_alpha, the trivial extractability level."""
    return float(np.cos(theta(alpha)) ** 2)
