"""A CHSH-violating state with singlet extractability 1/2, and checks of its proof.

The state lives on X ⊗ Y ⊗ A ⊗ B with classical three-level registers X, Y
held by Alice and Bob next to their qubits A, B:

    ρ = Σ_xy p_xy |xy⟩⟨xy| ⊗ ρ^xy.

The eight outer ("frame") cells carry classically correlated two-qubit states
scoring the local bound 2; the centre cell (1, 1) carries a maximally
entangled state scoring 2√2 with weight v. The lemma checkers test the three
auxiliary inequalities used to bound the extraction fidelity by 1/2.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import channels as chn
from . import sampling
from .matcore import I2, X, Y, Z, hs_inner, jacobi_eigh, ket_to_dm, permute_subsystems, tensor

V_PAPER = 1 / 597
SQRT2 = np.sqrt(2)
PROB_TOL = 1e-12
BLOCK_SIZE = 1000

# ordering of the 36-dim space and the per-party ordering used for extraction
DIMS_XYAB = (3, 3, 2, 2)
XYAB_TO_XAYB = (0, 2, 1, 3)

PHI_PLUS = ket_to_dm(np.array([1, 0, 0, 1]) / SQRT2)

FRAME_CELLS = ((0, 0), (0, 1), (1, 0), (0, 2), (2, 0), (2, 2))
UNDEFINED_CELLS = ((1, 2), (2, 1))


# --- probability table and state -----------------------------------------


@dataclass(frozen=True)
class ProbTable:
    v: float
    p: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.shape != (3, 3):
            raise ValueError(f"probability table must be 3x3, got {p.shape}")
        if np.any(p < 0):
            raise ValueError("probabilities must be non-negative")
        if abs(p.sum() - 1) > PROB_TOL:
            raise ValueError(f"probabilities sum to {p.sum()!r}")
        if p[1, 2] != 0 or p[2, 1] != 0:
            raise ValueError("cells (1,2) and (2,1) must carry zero weight")
        if p[1, 1] != self.v:
            raise ValueError("p[1,1] must equal v")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @classmethod
    def for_v(cls, v: float) -> "ProbTable":
        v = float(v)
        if not 0 <= v <= 1:
            raise ValueError(f"v must lie in [0, 1], got {v!r}")
        w = 1 - v
        p = np.zeros((3, 3))
        p[0, 0] = 4 / 31 * w
        p[0, 1] = p[1, 0] = 3 / 62 * w
        p[0, 2] = p[2, 0] = p[2, 2] = 8 / 31 * w
        p[1, 1] = v
        return cls(v, p)


def _basis_dm(bits: str) -> np.ndarray:
    vec = np.zeros(4)
    vec[int(bits, 2)] = 1
    return np.outer(vec, vec).astype(complex)


def frame_states() -> dict:
    """Classically correlated blocks for the six frame cells with non-zero weight."""
    both = 0.5 * (_basis_dm("00") + _basis_dm("11"))
    return {
        (0, 0): _basis_dm("11"),
        (0, 1): both,
        (1, 0): both,
        (0, 2): both,
        (2, 0): both,
        (2, 2): 0.5 * (_basis_dm("01") + _basis_dm("10")),
    }


# --- observables and CHSH operator -----------------------------------------

# A_r^x: Alice's observables in block x (B is symmetric in y)
_A0 = (Z, Z, Z)
_A1 = (Z, X, -Z)


def block_operator(x: int, y: int) -> np.ndarray:
    """W^xy = A0^x ⊗ (B0^y + B1^y) + A1^x ⊗ (B0^y - B1^y)."""
    return tensor(_A0[x], _A0[y] + _A1[y]) + tensor(_A1[x], _A0[y] - _A1[y])


@dataclass(frozen=True)
class ChshBlockTable:
    W: dict = field(repr=False)

    @classmethod
    def build(cls) -> "ChshBlockTable":
        return cls({(x, y): block_operator(x, y) for x in range(3) for y in range(3)})


def _register_observable(blocks) -> np.ndarray:
    """Σ_x |x⟩⟨x| ⊗ O_x on a 3-level register times a qubit."""
    out = np.zeros((6, 6), dtype=complex)
    for x, o in enumerate(blocks):
        out[2 * x:2 * x + 2, 2 * x:2 * x + 2] = o
    return out


def chsh_operator() -> np.ndarray:
    """The full CHSH operator on X ⊗ Y ⊗ A ⊗ B (36×36)."""
    a0, a1 = _register_observable(_A0), _register_observable(_A1)
    w_xayb = tensor(a0, a0 + a1) + tensor(a1, a0 - a1)
    # built as (X A)(Y B); reorder to X Y A B
    return permute_subsystems(w_xayb, (3, 2, 3, 2), (0, 2, 1, 3))


def centre_state() -> np.ndarray:
    """The pure state attaining 2√2 on W^11 (maximally entangled)."""
    w, v = jacobi_eigh(block_operator(1, 1), vectors=True)
    psi = v[:, -1]
    k = int(np.argmax(np.abs(psi)))
    psi = psi * (abs(psi[k]) / psi[k])  # fix the global phase
    return ket_to_dm(psi)


@dataclass(frozen=True)
class CounterexampleState:
    probs: ProbTable
    rho: np.ndarray = field(repr=False)
    frame_states: dict = field(repr=False)
    centre_state: np.ndarray = field(repr=False)

    @property
    def v(self) -> float:
        return self.probs.v

    def block(self, x: int, y: int) -> np.ndarray:
        """Normalised ρ^xy (only for cells with non-zero weight)."""
        if (x, y) == (1, 1):
            return self.centre_state
        if (x, y) not in self.frame_states:
            raise KeyError(f"cell {(x, y)} carries no state")
        return self.frame_states[(x, y)]

    def party_ordered(self) -> np.ndarray:
        """ρ with factors reordered to (X ⊗ A) ⊗ (Y ⊗ B)."""
        return permute_subsystems(self.rho, DIMS_XYAB, XYAB_TO_XAYB)


def build_state(v: float = V_PAPER) -> CounterexampleState:
    v = float(v)
    if not 0 < v < 1:
        raise ValueError(f"v must lie in (0, 1), got {v!r}")
    probs = ProbTable.for_v(v)
    frames = frame_states()
    centre = centre_state()
    rho = np.zeros((36, 36), dtype=complex)
    for x in range(3):
        for y in range(3):
            p = probs.p[x, y]
            if p == 0:
                continue
            block = centre if (x, y) == (1, 1) else frames[(x, y)]
            reg = np.zeros((9, 9))
            reg[3 * x + y, 3 * x + y] = 1
            rho += p * np.kron(reg, block)
    state = CounterexampleState(probs, rho, frames, centre)
    _check_block_values(state)
    return state


def _check_block_values(state: CounterexampleState, tol: float = 1e-12) -> None:
    table = ChshBlockTable.build().W
    for (x, y), p in np.ndenumerate(state.probs.p):
        if p == 0:
            continue
        want = 2 * SQRT2 if (x, y) == (1, 1) else 2.0
        got = hs_inner(table[(x, y)], state.block(x, y)).real
        if abs(got - want) > tol:
            raise RuntimeError(f"block {(x, y)} scores {got!r}, expected {want!r}")


def chsh_value_closed_form(v: float) -> float:
    return 2 + (2 * SQRT2 - 2) * v


def chsh_value(state: CounterexampleState, check: bool = True) -> float:
    """⟨W, ρ⟩ by direct 36×36 contraction, cross-checked against the closed form."""
    beta = hs_inner(chsh_operator(), state.rho).real
    if check:
        want = chsh_value_closed_form(state.v)
        if abs(beta - want) > 1e-12:
            raise RuntimeError(f"CHSH value {beta!r} disagrees with closed form {want!r}")
    return beta


# --- extraction diagnostics --------------------------------------------------


def block_fidelity(ch_a: chn.QubitChannel, ch_b: chn.QubitChannel, rho_block, target=PHI_PLUS) -> float:
    return hs_inner(chn.apply_local(ch_a, ch_b, rho_block), target).real


def extraction_fidelity(state: CounterexampleState, channels_a, channels_b, target=PHI_PLUS) -> float:
    """Σ_xy p_xy ⟨(Λ_A^x ⊗ Λ_B^y)(ρ^xy), target⟩ for per-symbol channels."""
    total = 0.0
    for (x, y), p in np.ndenumerate(state.probs.p):
        if p > 0:
            total += p * block_fidelity(channels_a[x], channels_b[y], state.block(x, y), target)
    return total


def epsilon_diagnostics(state: CounterexampleState, channels_a, channels_b) -> dict:
    """ε_xy = ½ - frame-cell fidelity with Φ⁺, and their weighted average ε_wav."""
    eps = {}
    for cell in FRAME_CELLS:
        x, y = cell
        eps[cell] = 0.5 - block_fidelity(channels_a[x], channels_b[y], state.block(x, y))
    w = 1 - state.v
    eps_wav = sum(state.probs.p[c] / w * e for c, e in eps.items())
    return {"eps": eps, "eps_wav": eps_wav}


# --- lemma checks ----------------------------------------------------------------


@dataclass
class LemmaReport:
    check_name: str
    samples: int
    worst_slack: float
    violations: int
    tolerance: float
    worst_sample: Optional[dict] = field(default=None, repr=False, compare=False)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def record(self) -> dict:
        return {
            "check_name": self.check_name,
            "samples": self.samples,
            "worst_slack": self.worst_slack,
            "violations": self.violations,
        }


def _block_streams(samples: int, seed: int):
    n_blocks = -(-samples // BLOCK_SIZE)
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    sizes = [min(BLOCK_SIZE, samples - i * BLOCK_SIZE) for i in range(n_blocks)]
    return list(zip(children, sizes))


def _run_blocks(name: str, block_fn: Callable, samples: int, seed: int, tol: float, workers: int = 1) -> LemmaReport:
    if int(samples) != samples or samples < 1:
        raise ValueError(f"samples must be a positive integer, got {samples!r}")
    jobs = _block_streams(int(samples), seed)
    fns = [block_fn] * len(jobs)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_block_job, fns, *zip(*jobs)))
    else:
        results = [_block_job(block_fn, ss, n) for ss, n in jobs]
    slacks = np.concatenate([r[0] for r in results])
    worst = int(np.argmin(slacks))
    return LemmaReport(
        check_name=name,
        samples=int(samples),
        worst_slack=float(slacks[worst]),
        violations=int(np.sum(slacks < -tol)),
        tolerance=tol,
        worst_sample=results[worst // BLOCK_SIZE][1],
    )


def _block_job(block_fn: Callable, ss, n: int):
    # run one block and keep only its worst sample, so results stay picklable
    slacks, sample = block_fn(ss, n)
    return slacks, sample(int(np.argmin(slacks)))


def _batched_inner(a, b) -> np.ndarray:
    return np.einsum("nij,nij->n", np.conj(a), b).real


def triangle_slack(rho0, rho1, sigma) -> np.ndarray:
    """⟨ρ0, ρ1⟩ - [2(⟨ρ0, σ⟩ + ⟨ρ1, σ⟩) - 3], batched over a leading axis."""
    return _batched_inner(rho0, rho1) - (2 * (_batched_inner(rho0, sigma) + _batched_inner(rho1, sigma)) - 3)


def _triangle_block(ss, n):
    rng = np.random.default_rng(ss)
    # four equal groups: qubit / two-qubit, mixed / pure
    groups = [(2, None), (2, 1), (4, None), (4, 1)]
    counts = [n // 4 + (1 if i < n % 4 else 0) for i in range(4)]
    slacks, trip = [], []
    for (d, rank), m in zip(groups, counts):
        r0, r1, sg = (sampling.random_density(rng, m, d, rank) for _ in range(3))
        slacks.append(triangle_slack(r0, r1, sg))
        trip.extend(zip(r0, r1, sg))
    return np.concatenate(slacks), lambda i: {"rho0": trip[i][0], "rho1": trip[i][1], "sigma": trip[i][2]}


def check_lemma_triangle(samples: int = 100_000, seed: int = 0, tol: float = 1e-12, workers: int = 1) -> LemmaReport:
    """⟨ρ0, ρ1⟩ ≥ 2(⟨ρ0, σ⟩ + ⟨ρ1, σ⟩) - 3 on random triples of one- and two-qubit states."""
    return _run_blocks("lemma_triangle", _triangle_block, samples, seed, tol, workers)


def per_symbol_channels(kraus: np.ndarray, symbols: int = 3) -> list:
    """Λ_j(S) = Λ(|j⟩⟨j| ⊗ S) for a channel on C^symbols ⊗ C^2 given by Kraus operators."""
    kraus = np.asarray(kraus)
    return [chn.QubitChannel.from_kraus(kraus[:, :, 2 * j:2 * j + 2]) for j in range(symbols)]


def _cq_block(ss, n):
    rng = np.random.default_rng(ss)
    dev = np.empty(n)
    kept = []
    for i in range(n):
        kc = 3 + i % 10  # Stinespring needs at least 3 Kraus operators for C^6 -> C^2
        kraus = sampling.random_kraus(rng, 1, 6, 2, kc)[0]
        s_blocks = sampling.random_hermitian(rng, 3, 2)
        r = np.zeros((6, 6), dtype=complex)
        for j in range(3):
            r[2 * j:2 * j + 2, 2 * j:2 * j + 2] = s_blocks[j]
        direct = sampling.apply_kraus(kraus, r)
        split = sum(chn.apply(ch, s_blocks[j]) for j, ch in enumerate(per_symbol_channels(kraus)))
        dev[i] = np.max(np.abs(direct - split))
        kept.append((kraus, s_blocks))
    return -dev, lambda i: {"kraus": kept[i][0], "blocks": kept[i][1]}


def check_lemma_cq_channel(samples: int = 1000, seed: int = 0, tol: float = 1e-10, workers: int = 1) -> LemmaReport:
    """Per-symbol channels reproduce Λ on classical-quantum inputs; slack is minus the deviation."""
    return _run_blocks("lemma_cq_channel", _cq_block, samples, seed, tol, workers)


def _norm_2x2(m: np.ndarray) -> np.ndarray:
    """Operator norm of batched 2×2 Hermitian matrices."""
    half_tr = 0.5 * (m[..., 0, 0] + m[..., 1, 1]).real
    half_diff = 0.5 * (m[..., 0, 0] - m[..., 1, 1]).real
    r = np.sqrt(half_diff**2 + np.abs(m[..., 0, 1]) ** 2)
    return np.abs(half_tr) + r


def _lambda_min_2x2(m: np.ndarray) -> np.ndarray:
    half_tr = 0.5 * (m[..., 0, 0] + m[..., 1, 1]).real
    half_diff = 0.5 * (m[..., 0, 0] - m[..., 1, 1]).real
    return half_tr - np.sqrt(half_diff**2 + np.abs(m[..., 0, 1]) ** 2)


def min_output_eigenvalue(kraus: np.ndarray) -> np.ndarray:
    """λ_min(Λ(𝟙/2)) for batched qubit Kraus sets (..., e, 2, 2)."""
    half = np.broadcast_to(I2 / 2, kraus.shape[:-3] + (2, 2))
    return _lambda_min_2x2(sampling.apply_kraus(kraus, half))


def spectrum_slack(kraus: np.ndarray, gammas: np.ndarray) -> np.ndarray:
    """min over Γ of 2√λ - ‖Λ(Γ)‖∞, batched over Kraus sets (n, e, 2, 2) and Γ (n, g, 2, 2)."""
    lam = np.clip(min_output_eigenvalue(kraus), 0, None)
    out = np.einsum("neab,ngbc,nedc->ngad", kraus, gammas, np.conj(kraus))
    return np.min(2 * np.sqrt(lam)[:, None] - _norm_2x2(out), axis=-1)


def _random_observables(rng, n: int, g: int) -> np.ndarray:
    u = sampling.haar_unitary(rng, n * g, 2)
    return (u @ Z @ np.conj(np.swapaxes(u, -1, -2))).reshape(n, g, 2, 2)


def _spectrum_block(ss, n, extra: int = 100):
    rng = np.random.default_rng(ss)
    slack = np.empty(n)
    keep = {}
    paulis = np.array([X, Y, Z])
    for kc in range(1, 5):
        idx = np.arange(kc - 1, n, 4)
        if not len(idx):
            continue
        kraus = sampling.random_kraus(rng, len(idx), 2, 2, kc)
        gam = np.concatenate([np.broadcast_to(paulis, (len(idx), 3, 2, 2)),
                              _random_observables(rng, len(idx), extra)], axis=1)
        slack[idx] = spectrum_slack(kraus, gam)
        for j, i in enumerate(idx):
            keep[int(i)] = (kraus[j], gam[j])
    return slack, lambda i: {"kraus": keep[i][0], "gammas": keep[i][1]}


def check_lemma_spectrum(samples: int = 10_000, seed: int = 0, tol: float = 1e-10, workers: int = 1) -> LemmaReport:
    """‖Λ(Γ)‖∞ ≤ 2√λ with λ = λ_min(Λ(𝟙/2)), for Pauli-like Γ and random qubit channels."""
    return _run_blocks("lemma_spectrum", _spectrum_block, samples, seed, tol, workers)


# --- centre bound -------------------------------------------------------------


class BoundViolation(RuntimeError):
    pass


@dataclass(frozen=True)
class CentreBound:
    lhs: float
    rhs: float
    separable_term: float
    correlation_term: float


_TAU = (np.eye(4) - np.kron(Y, Y)) / 4  # separable part of Φ⁺


def centre_fidelity_bound_check(ch_a: chn.QubitChannel, ch_b: chn.QubitChannel, tol: float = 1e-12) -> CentreBound:
    """Centre-cell fidelity against ½ + 2√(λ_A λ_B).

    Φ⁺ = τ + ¼(X⊗X + Z⊗Z) with τ separable: the τ part contributes at most ½,
    and each correlation term at most ‖Λ_A(P)‖‖Λ_B(P)‖ ≤ 4√(λ_A λ_B).
    """
    lhs = block_fidelity(ch_a, ch_b, PHI_PLUS)
    sep = block_fidelity(ch_a, ch_b, _TAU)
    corr = lhs - sep
    lam_a = max(float(_lambda_min_2x2(ch_a(I2 / 2))), 0.0)
    lam_b = max(float(_lambda_min_2x2(ch_b(I2 / 2))), 0.0)
    rhs = 0.5 + 2 * np.sqrt(lam_a * lam_b)
    if lhs > rhs + tol:
        raise BoundViolation(f"centre fidelity {lhs!r} exceeds bound {rhs!r}")
    return CentreBound(lhs, float(rhs), sep, corr)


def centre_fidelity_from_kraus(kraus_a: np.ndarray, kraus_b: np.ndarray) -> np.ndarray:
    """⟨(Λ_A ⊗ Λ_B)(Φ⁺), Φ⁺⟩ = Σ_ef |tr(K_e L_fᵀ)|² / 4, batched over (n, e, 2, 2) Kraus sets."""
    t = np.einsum("neab,nfab->nef", kraus_a, kraus_b)
    return np.sum(np.abs(t) ** 2, axis=(1, 2)) / 4


def _centre_block(ss, n):
    rng = np.random.default_rng(ss)
    slack = np.empty(n)
    keep = {}
    for ka_count in range(1, 5):
        for kb_count in range(1, 5):
            idx = np.arange(4 * (ka_count - 1) + kb_count - 1, n, 16)
            if not len(idx):
                continue
            ka = sampling.random_kraus(rng, len(idx), 2, 2, ka_count)
            kb = sampling.random_kraus(rng, len(idx), 2, 2, kb_count)
            lam_a = np.clip(min_output_eigenvalue(ka), 0, None)
            lam_b = np.clip(min_output_eigenvalue(kb), 0, None)
            slack[idx] = 0.5 + 2 * np.sqrt(lam_a * lam_b) - centre_fidelity_from_kraus(ka, kb)
            for j, i in enumerate(idx):
                keep[int(i)] = (ka[j], kb[j])
    return slack, lambda i: {"kraus_a": keep[i][0], "kraus_b": keep[i][1]}


def check_centre_bound(samples: int = 10_000, seed: int = 0, tol: float = 1e-12, workers: int = 1) -> LemmaReport:
    """Centre-cell fidelity ≤ ½ + 2√(λ_A λ_B) on random channel pairs (Kraus route)."""
    return _run_blocks("centre_bound", _centre_block, samples, seed, tol, workers)


# --- serialisation ----------------------------------------------------------------

REPORT_COLUMNS = ("check_name", "samples", "worst_slack", "violations")


def write_reports_csv(reports, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        for r in reports:
            w.writerow([r.check_name, r.samples, f"{r.worst_slack:.17g}", r.violations])


def write_reports_jsonl(reports, path) -> None:
    with open(path, "w") as fh:
        for r in reports:
            fh.write(json.dumps(r.record()) + "\n")


def dump_sample(sample: dict, path) -> None:
    """Write an offending sample's matrices as JSON (real and imaginary parts)."""
    out = {k: {"real": np.real(v).tolist(), "imag": np.imag(v).tolist()} for k, v in sample.items()}
    with open(path, "w") as fh:
        json.dump(out, fh)
