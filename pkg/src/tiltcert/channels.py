"""Qubit channels in Choi form, the dephasing extraction family and K operators.

A :class:`QubitChannel` stores the unnormalised Choi operator
``C = Σ_ij |i⟩⟨j| ⊗ Λ(|i⟩⟨j|)`` with the input factor first, so that
``Λ(X) = tr_in[C (Xᵀ ⊗ 1)]``.

The extraction channels mix the identity with conjugation by a Pauli axis.
Their Pauli transfer matrices are diagonal, which gives a cheap closed form
for K(a, b) used by the grid scan; the Choi route is kept as the reference.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import bell
from .matcore import I2, PAULIS, X, Z, as_hermitian, eigvalsh_batch, jacobi_eigh, partial_trace

CHANNEL_TOL = 1e-10
QUARTER_PI = np.pi / 4
HALF_PI = np.pi / 2


class InvalidChannelError(ValueError):
    pass


@dataclass(frozen=True)
class QubitChannel:
    choi: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.choi, dtype=complex)
        if c.shape != (4, 4):
            raise InvalidChannelError(f"qubit channel needs a 4x4 Choi operator, got {c.shape}")
        c = as_hermitian(c, tol=CHANNEL_TOL)
        lo = eigvalsh_batch(c)[0]
        if lo < -CHANNEL_TOL:
            raise InvalidChannelError(f"Choi operator not positive (min eigenvalue {lo:.3e})")
        marg = partial_trace(c, [2, 2], [0])
        if np.max(np.abs(marg - np.eye(2))) > CHANNEL_TOL:
            raise InvalidChannelError("channel is not trace preserving")
        c.setflags(write=False)
        object.__setattr__(self, "choi", c)

    @classmethod
    def from_kraus(cls, kraus: Sequence[np.ndarray]) -> "QubitChannel":
        return cls(choi_from_kraus(kraus))

    def __call__(self, rho) -> np.ndarray:
        return apply(self, rho)

    def kraus(self) -> list[np.ndarray]:
        w, v = jacobi_eigh(self.choi, vectors=True)
        ops = []
        for k in range(4):
            if w[k] > 1e-14:
                # column of v is vec(K^T) in (in, out) order
                ops.append(np.sqrt(w[k]) * v[:, k].reshape(2, 2).T)
        return ops

    def transfer_matrix(self) -> np.ndarray:
        return pauli_transfer_matrix(self)


def choi_from_kraus(kraus: Sequence[np.ndarray]) -> np.ndarray:
    c = np.zeros((4, 4), dtype=complex)
    for k in kraus:
        k = np.asarray(k, dtype=complex)
        # vec in (in, out) order: entry (i, o) = K[o, i]
        vec = k.T.reshape(-1)
        c += np.outer(vec, vec.conj())
    return c


def apply(ch: QubitChannel, rho) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.shape != (2, 2):
        raise ValueError(f"expected a 2x2 operator, got shape {rho.shape}")
    c = ch.choi.reshape(2, 2, 2, 2)
    # Λ(X)[k, l] = Σ_ij X[i, j] C[(i, k), (j, l)]
    return np.einsum("ij,ikjl->kl", rho, c)


def apply_dual(ch: QubitChannel, y) -> np.ndarray:
    """Adjoint map Λ† with ⟨Λ(X), Y⟩ = ⟨X, Λ†(Y)⟩."""
    y = np.asarray(y)
    c = ch.choi.reshape(2, 2, 2, 2)
    # Λ†(Y)[i, j] = Σ_kl conj(C[(i, k), (j, l)]) Y[k, l]
    return np.einsum("ikjl,kl->ij", c.conj(), y)


def apply_local(ch_a: QubitChannel, ch_b: QubitChannel, rho) -> np.ndarray:
    """(Λ_A ⊗ Λ_B)(ρ) for a two-qubit operator ρ."""
    rho = np.asarray(rho).reshape(2, 2, 2, 2)
    ca = ch_a.choi.reshape(2, 2, 2, 2)
    cb = ch_b.choi.reshape(2, 2, 2, 2)
    out = np.einsum("ipjq,ikjl,pmqn->kmln", rho, ca, cb)
    return out.reshape(4, 4)


def pauli_transfer_matrix(ch: QubitChannel) -> np.ndarray:
    """Real R with R[k, i] = tr(σ_k Λ(σ_i)) / 2."""
    r = np.empty((4, 4))
    for i, si in enumerate(PAULIS):
        out = apply(ch, si)
        for k, sk in enumerate(PAULIS):
            r[k, i] = 0.5 * np.trace(sk @ out).real
    return r


def identity_channel() -> QubitChannel:
    return QubitChannel.from_kraus([I2])


def replacement_channel(state) -> QubitChannel:
    """Erase the input and prepare ``state``."""
    state = np.asarray(state, dtype=complex)
    c = np.kron(np.eye(2), state)
    return QubitChannel(c)


# --- dephasing extraction family -------------------------------------------


def sin_cos_profile(x):
    """g(x) = (1 + √2)(sin x + cos x - 1): 0 at the edges, 1 at π/4."""
    x = np.asarray(x, dtype=float)
    return (1 + np.sqrt(2)) * (np.sin(x) + np.cos(x) - 1)


@dataclass(frozen=True)
class DampingProfile:
    """Damping strength g(x) and the dephasing axis switch at π/4."""

    g: Callable = sin_cos_profile
    name: str = "sin-cos"

    def axis_is_x(self, x):
        return np.asarray(x) <= QUARTER_PI

    def axis(self, x: float) -> np.ndarray:
        return X if x <= QUARTER_PI else Z

    def check(self, samples: int = 1001, tol: float = 1e-12) -> None:
        xs = np.linspace(0, HALF_PI, samples)
        gs = np.asarray(self.g(xs))
        if abs(float(self.g(0.0))) > tol or abs(float(self.g(HALF_PI))) > tol:
            raise ValueError(f"profile {self.name!r} must vanish at 0 and pi/2")
        if abs(float(self.g(QUARTER_PI)) - 1) > tol:
            raise ValueError(f"profile {self.name!r} must equal 1 at pi/4")
        if gs.min() < -tol or gs.max() > 1 + tol:
            raise ValueError(f"profile {self.name!r} leaves [0, 1]")


DEFAULT_PROFILE = DampingProfile()


@dataclass(frozen=True)
class EffectiveAngle:
    """Piecewise-linear remap sending [0, b*] → [0, π/4] and [b*, π/2] → [π/4, π/2]."""

    b_star: float

    def __post_init__(self):
        if not (0 < self.b_star <= QUARTER_PI + 1e-15):
            raise ValueError(f"kink location must lie in (0, pi/4], got {self.b_star!r}")

    @classmethod
    def for_alpha(cls, alpha: float) -> "EffectiveAngle":
        return cls(bell.optimal_angles(alpha)[1])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        b = self.b_star
        lower = QUARTER_PI * x / b
        upper = HALF_PI - QUARTER_PI * (np.pi - 2 * x) / (np.pi - 2 * b)
        out = np.where(x <= b, lower, upper)
        return float(out) if out.ndim == 0 else out


def _check_x(x: float) -> float:
    x = float(x)
    if not (0 <= x <= HALF_PI):
        raise ValueError(f"channel angle must lie in [0, pi/2], got {x!r}")
    return x


def dephasing_channel(x: float, profile: DampingProfile = DEFAULT_PROFILE) -> QubitChannel:
    """ρ ↦ (1 + g)/2 ρ + (1 - g)/2 Γ ρ Γ with g = g(x), Γ = Γ(x)."""
    x = _check_x(x)
    # clip rounding excursions (g(π/4) evaluates to 1 + 2e-16)
    g = min(max(float(profile.g(x)), 0.0), 1.0)
    gamma = profile.axis(x)
    return QubitChannel.from_kraus([np.sqrt((1 + g) / 2) * I2, np.sqrt((1 - g) / 2) * gamma])


def bob_channel(x: float, alpha: float, profile: DampingProfile = DEFAULT_PROFILE) -> QubitChannel:
    x = _check_x(x)
    h = EffectiveAngle.for_alpha(alpha)
    return dephasing_channel(min(max(h(x), 0.0), HALF_PI), profile)


def dephasing_transfer_diagonal(x, profile: DampingProfile = DEFAULT_PROFILE) -> np.ndarray:
    """Diagonal of the Pauli transfer matrix, shape (..., 4), order (I, X, Y, Z).

    X-axis dephasing keeps I and X and scales Y, Z by g; Z-axis keeps I and Z.
    """
    x = np.asarray(x, dtype=float)
    g = np.clip(np.asarray(profile.g(x), dtype=float), 0.0, 1.0)
    on_x = profile.axis_is_x(x)
    one = np.ones_like(g)
    return np.stack([one, np.where(on_x, one, g), g, np.where(on_x, g, one)], axis=-1)


def k_operator(alpha: float, a: float, b: float, profile: DampingProfile = DEFAULT_PROFILE) -> np.ndarray:
    """K_alpha(a, b) = (Λ_A(a) ⊗ Λ_B(b))(Φ_alpha), via Choi operators.

    The dephasing channels are self-dual, so this equals the dual-channel form.
    """
    phi = bell.optimal_state(alpha)
    return apply_local(dephasing_channel(a, profile), bob_channel(b, alpha, profile), phi)


def k_operator_batch(alpha: float, a, b, profile: DampingProfile = DEFAULT_PROFILE) -> np.ndarray:
    """Real K operators for broadcast angle arrays, shape (..., 4, 4).

    Uses the diagonal transfer matrices: c_ij ↦ dA_i dB_j c_ij in the Pauli
    expansion of Φ_alpha. Φ_alpha only involves real Pauli products (Y⊗Y is
    real), so the result is real.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    h = EffectiveAngle.for_alpha(alpha)
    da = dephasing_transfer_diagonal(a, profile)
    db = dephasing_transfer_diagonal(np.clip(h(b), 0.0, HALF_PI), profile)
    c = bell.optimal_state_coefficients(alpha)
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape) + (4, 4))
    for i in range(4):
        for j in range(4):
            if c[i, j] != 0:
                coef = 0.25 * c[i, j] * da[..., i] * db[..., j]
                out += coef[..., None, None] * _REAL_PAULI_PRODUCTS[i][j]
    return out


def _real_products():
    table = []
    for pa in PAULIS:
        row = []
        for pb in PAULIS:
            m = np.kron(pa, pb)
            row.append(m.real if not np.any(m.imag) else None)
        table.append(row)
    return table


_REAL_PAULI_PRODUCTS = _real_products()
