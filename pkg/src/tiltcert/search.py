"""Heuristic search for good local extraction channels.

Each party first reads its classical register (if any) and then applies a
qubit channel chosen by the symbol. Any such pair of channel families is a
feasible point, so the best fidelity found is a lower bound on extractability.

Channels are parametrised by an unconstrained complex matrix M (2k × 2)
through its polar isometry V = M (M†M)^(-1/2), whose 2×2 blocks are Kraus
operators. The objective is written with Pauli transfer matrices: for blocks
ρ_xy = ¼ Σ c_ij σ_i ⊗ σ_j and target φ = ¼ Σ d_kl σ_k ⊗ σ_l,

    F = ¼ Σ_xy ⟨d, R^A_x c_xy (R^B_y)ᵀ⟩,

which is linear in every single channel's transfer matrix. A coordinate probe
therefore costs one transfer matrix and an inner product with that channel's
gradient.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import bell, bounds
from . import channels as chn
from .matcore import I2, PAULIS, hs_inner, pauli_coefficients

COMPLETENESS_TOL = 1e-10
RESTART_BLOCK = 50
MIN_GAIN = 1e-14  # improvements below this count as failures (rounding noise)
_P = np.array(PAULIS)


# --- parametrisation ---------------------------------------------------------


def _isometries(params: np.ndarray, kraus_count: int) -> np.ndarray:
    """Polar isometries (..., 2k, 2) from real parameter vectors (..., 8k)."""
    n = 4 * kraus_count
    m = (params[..., :n] + 1j * params[..., n:]).reshape(params.shape[:-1] + (2 * kraus_count, 2))
    g = np.conj(np.swapaxes(m, -1, -2)) @ m
    # inverse square root of a 2×2 positive matrix in closed form
    det = (g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]).real
    sd = np.sqrt(np.clip(det, 0, None))
    tr = (g[..., 0, 0] + g[..., 1, 1]).real
    norm = np.sqrt(tr + 2 * sd)
    root = (g + sd[..., None, None] * I2) / norm[..., None, None]
    rdet = (root[..., 0, 0] * root[..., 1, 1] - root[..., 0, 1] * root[..., 1, 0])
    inv = np.empty_like(root)
    inv[..., 0, 0] = root[..., 1, 1]
    inv[..., 1, 1] = root[..., 0, 0]
    inv[..., 0, 1] = -root[..., 0, 1]
    inv[..., 1, 0] = -root[..., 1, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        # rank-deficient M gives non-finite entries; callers reject those
        inv = inv / rdet[..., None, None]
    return m @ inv


def _kraus_from_isometry(v: np.ndarray, kraus_count: int) -> np.ndarray:
    return v.reshape(v.shape[:-2] + (kraus_count, 2, 2))


def _pauli_structure() -> np.ndarray:
    # S[k, i, a, b] = ½ tr(σ_k σ_a σ_i σ_b): with K = Σ_a κ_a σ_a the map
    # σ_i ↦ K σ_i K† has transfer entries Σ_ab S[k, i, a, b] κ_a conj(κ_b)
    s = np.einsum("kxy,ayz,izw,bwx->kiab", _P, _P, _P, _P) / 2
    return s.reshape(16, 16)


_STRUCT = _pauli_structure()


def _transfer_matrices(params: np.ndarray, kraus_count: int) -> np.ndarray:
    """Real Pauli transfer matrices R[k, i] = tr(σ_k Λ(σ_i))/2, shape (..., 4, 4)."""
    k = _kraus_from_isometry(_isometries(params, kraus_count), kraus_count)
    # Pauli components κ_a = tr(σ_a K)/2 (Paulis are Hermitian, so tr(σ_a K) = Σ conj(σ_a)_ij K_ij)
    kappa = k.reshape(k.shape[:-2] + (4,)) @ (_P.conj().reshape(4, 4).T / 2)
    q = np.swapaxes(kappa, -1, -2) @ np.conj(kappa)  # Σ_e κ_a conj(κ_b)
    r = (q.reshape(q.shape[:-2] + (16,)) @ _STRUCT.T).real
    return r.reshape(r.shape[:-1] + (4, 4))


@dataclass(frozen=True)
class ChannelParametrization:
    """A qubit channel given by real parameters of a 2 → 2k isometry."""

    kraus_count: int
    parameters: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.kraus_count not in (1, 2, 3, 4):
            raise ValueError(f"kraus_count must be 1..4, got {self.kraus_count!r}")
        p = np.array(self.parameters, dtype=float).reshape(-1)
        if p.size != 8 * self.kraus_count:
            raise ValueError(f"expected {8 * self.kraus_count} parameters, got {p.size}")
        if not np.all(np.isfinite(p)) or not np.any(p):
            raise ValueError("parameters must be finite and not all zero")
        p.setflags(write=False)
        object.__setattr__(self, "parameters", p)
        if not np.all(np.isfinite(self.isometry())):
            raise ValueError("parameters are rank-deficient: no isometry")
        kr = self.kraus()
        dev = np.max(np.abs(sum(np.conj(k.T) @ k for k in kr) - I2))
        if dev > COMPLETENESS_TOL:
            raise ValueError(f"Kraus completeness violated by {dev:.2e} (rank-deficient parameters?)")

    @classmethod
    def random(cls, rng: np.random.Generator, kraus_count: int = 2) -> "ChannelParametrization":
        # the polar part of a Ginibre matrix is a Haar-random isometry
        return cls(kraus_count, rng.standard_normal(8 * kraus_count))

    def isometry(self) -> np.ndarray:
        return _isometries(self.parameters, self.kraus_count)

    def kraus(self) -> list:
        return list(_kraus_from_isometry(self.isometry(), self.kraus_count))

    def channel(self) -> chn.QubitChannel:
        return chn.QubitChannel.from_kraus(self.kraus())

    def transfer_matrix(self) -> np.ndarray:
        return _transfer_matrices(self.parameters, self.kraus_count)


@dataclass(frozen=True)
class SearchConfig:
    restarts: int = 100
    seed: int = 0
    max_iters: int = 3000
    step_tol: float = 1e-10
    initial_step: float = 0.25
    max_step: float = 1.0
    kraus_count: int = 2
    workers: int = 1

    def __post_init__(self):
        if int(self.restarts) != self.restarts or self.restarts < 1:
            raise ValueError(f"restarts must be a positive integer, got {self.restarts!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if not 0 < self.step_tol < self.initial_step <= self.max_step:
            raise ValueError("need 0 < step_tol < initial_step <= max_step")
        if self.kraus_count not in (1, 2, 3, 4):
            raise ValueError("kraus_count must be 1..4")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


# --- problem set-up ------------------------------------------------------------


def _check_pure_target(target) -> np.ndarray:
    target = np.asarray(target, dtype=complex)
    if target.shape != (4, 4):
        raise ValueError(f"target must be a two-qubit density matrix, got shape {target.shape}")
    if abs(np.trace(target).real - 1) > 1e-10 or abs(hs_inner(target, target).real - 1) > 1e-10:
        raise ValueError("target must be a pure state")
    return target


def classical_blocks(rho, arity: Sequence[int]) -> np.ndarray:
    """Unnormalised blocks ρ_xy (nA, nB, 4, 4) of ρ on (X⊗A)⊗(Y⊗B).

    Reading the registers discards everything off the classical diagonal.
    """
    na, nb = (int(a) for a in arity)
    if na < 1 or nb < 1:
        raise ValueError("arities must be positive")
    rho = np.asarray(rho, dtype=complex)
    d = 4 * na * nb
    if rho.shape != (d, d):
        raise ValueError(f"state of shape {rho.shape} does not factor as ({2 * na})x({2 * nb})")
    t = rho.reshape(na, 2, nb, 2, na, 2, nb, 2)
    out = np.empty((na, nb, 4, 4), dtype=complex)
    for x in range(na):
        for y in range(nb):
            out[x, y] = t[x, :, y, :, x, :, y, :].reshape(4, 4)
    return out


@dataclass(frozen=True)
class _Problem:
    na: int
    nb: int
    c: np.ndarray  # (nA, nB, 4, 4) Pauli coefficients of the blocks
    d: np.ndarray  # (4, 4) Pauli coefficients of the target

    def value(self, r: np.ndarray) -> np.ndarray:
        ra, rb = r[:, :self.na], r[:, self.na:]
        return 0.25 * np.einsum("kl,nxki,xyij,nylj->n", self.d, ra, self.c, rb)

    def gradients(self, r: np.ndarray) -> np.ndarray:
        ra, rb = r[:, :self.na], r[:, self.na:]
        ga = 0.25 * np.einsum("kl,xyij,nylj->nxki", self.d, self.c, rb)
        gb = 0.25 * np.einsum("kl,nxki,xyij->nylj", self.d, ra, self.c)
        return np.concatenate([ga, gb], axis=1)


def _make_problem(rho, target, arity) -> _Problem:
    target = _check_pure_target(target)
    blocks = classical_blocks(rho, arity)
    c = pauli_coefficients(blocks)
    d = pauli_coefficients(target)
    return _Problem(int(arity[0]), int(arity[1]), c, d)


# --- pattern search ------------------------------------------------------------


def _pattern_search(problem: _Problem, params: np.ndarray, cfg: SearchConfig):
    """Batched coordinate pattern search; every restart evolves independently."""
    kc = cfg.kraus_count
    n, nch, m = params.shape
    params = params.copy()
    r = _transfer_matrices(params, kc)
    f = problem.value(r)
    step = np.full(n, cfg.initial_step)
    active = np.ones(n, dtype=bool)
    eye = np.eye(m)
    signs = np.array([1.0, -1.0])
    for _ in range(cfg.max_iters):
        if not active.any():
            break
        g = problem.gradients(r)
        delta = step[:, None, None, None, None] * signs[None, None, None, :, None] * eye[None, None, :, None, :]
        probe = params[:, :, None, None, :] + delta  # (n, C, m, 2, m)
        rp = _transfer_matrices(probe, kc)
        gain = np.einsum("ncjsab,ncab->ncjs", rp - r[:, :, None, None], g)
        flat = gain.reshape(n, -1)
        best = np.argmax(flat, axis=1)
        best_gain = flat[np.arange(n), best]

        # best single move
        single = params.copy()
        bc, bj, bs = np.unravel_index(best, gain.shape[1:])
        single[np.arange(n), bc, bj] += step * signs[bs]
        # combined move over every improving coordinate (better sign per coordinate)
        pos = gain.max(axis=-1)
        sgn = np.where(gain[..., 0] >= gain[..., 1], 1.0, -1.0)
        combined = params + np.where(pos > 0, sgn, 0.0) * step[:, None, None]

        r_single = _transfer_matrices(single, kc)
        r_comb = _transfer_matrices(combined, kc)
        f_single = problem.value(r_single)
        f_comb = problem.value(r_comb)
        use_comb = f_comb > f_single
        f_new = np.where(use_comb, f_comb, f_single)
        ok = active & (best_gain > 0) & (f_new > f + MIN_GAIN)

        params = np.where(ok[:, None, None], np.where(use_comb[:, None, None], combined, single), params)
        r = np.where(ok[:, None, None, None], np.where(use_comb[:, None, None, None], r_comb, r_single), r)
        f = np.where(ok, f_new, f)
        step = np.where(ok, np.minimum(2 * step, cfg.max_step), np.where(active, 0.5 * step, step))
        active &= step >= cfg.step_tol
    return params, f


def _restart_block(problem: _Problem, seeds: list, cfg: SearchConfig):
    nch = problem.na + problem.nb
    init = np.stack([
        np.random.default_rng(ss).standard_normal((nch, 8 * cfg.kraus_count)) for ss in seeds
    ])
    return _pattern_search(problem, init, cfg)


def _run_block(args):
    return _restart_block(*args)


@dataclass(frozen=True)
class SearchResult:
    value: float
    verified_value: float
    restart: int
    channels_a: tuple = field(repr=False)
    channels_b: tuple = field(repr=False)
    restart_values: np.ndarray = field(repr=False)
    parameters: np.ndarray = field(repr=False)


def fidelity_direct(rho, target, arity, channels_a, channels_b) -> float:
    """F by applying the channels to each classical block with Choi operators."""
    blocks = classical_blocks(rho, arity)
    target = np.asarray(target, dtype=complex)
    total = 0.0
    for x, ca in enumerate(channels_a):
        for y, cb in enumerate(channels_b):
            total += hs_inner(chn.apply_local(ca, cb, blocks[x, y]), target).real
    return total


def search_extraction(rho, target, arity: Sequence[int] = (1, 1), cfg: SearchConfig = SearchConfig()) -> SearchResult:
    """Best extraction fidelity over per-symbol qubit channel pairs.

    ``rho`` acts on (X ⊗ A) ⊗ (Y ⊗ B) with registers of sizes ``arity``.
    Restart i uses the i-th child of ``SeedSequence(cfg.seed)``, and restarts
    are processed in fixed blocks, so results depend only on the seed (not on
    the number of workers) and the first N restarts agree between runs.
    """
    problem = _make_problem(rho, target, arity)
    seeds = np.random.SeedSequence(int(cfg.seed)).spawn(cfg.restarts)
    jobs = [(problem, seeds[i:i + RESTART_BLOCK], cfg) for i in range(0, cfg.restarts, RESTART_BLOCK)]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            results = list(ex.map(_run_block, jobs))
    else:
        results = [_run_block(j) for j in jobs]
    params = np.concatenate([p for p, _ in results])
    values = np.concatenate([f for _, f in results])
    best = int(np.argmax(values))  # first maximum on ties
    chans = [ChannelParametrization(cfg.kraus_count, p).channel() for p in params[best]]
    ca, cb = tuple(chans[:problem.na]), tuple(chans[problem.na:])
    verified = fidelity_direct(rho, target, arity, ca, cb)
    value = float(values[best])
    if abs(verified - value) > 1e-12:
        raise RuntimeError(f"re-evaluated fidelity {verified!r} differs from search value {value!r}")
    if value > 1 + 1e-12:
        raise RuntimeError(f"fidelity {value!r} exceeds 1")
    return SearchResult(value, verified, best, ca, cb, values, params[best])


def extractability_lower_bound(rho, target, arity: Sequence[int] = (1, 1), cfg: SearchConfig = SearchConfig()) -> float:
    return search_extraction(rho, target, arity, cfg).value


# --- violation / extractability profile ---------------------------------------------

PROFILE_COLUMNS = ("beta", "search_lb", "cert_bound", "upper_bound")


def _flagged(op_flag0: np.ndarray, op_flag1: np.ndarray) -> np.ndarray:
    out = np.zeros((4, 4), dtype=complex)
    out[:2, :2] = op_flag0
    out[2:, 2:] = op_flag1
    return out


def profile_state(alpha: float, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Mixture of the optimal realisation and a deterministic one scoring β.

    Each party holds a flag qubit saying which realisation is in use: flag 0
    carries Φ_α with the optimal observables, flag 1 carries |00⟩ with
    observables fixed to +1, which scores β_C. Returns (ρ, W) on
    (flag_A ⊗ A) ⊗ (flag_B ⊗ B).
    """
    alpha = bell.check_alpha(alpha)
    beta_c, beta_q = bell.classical_value(alpha), bell.quantum_value(alpha)
    if not beta_c - 1e-12 <= beta <= beta_q + 1e-12:
        raise ValueError(f"beta must lie in [{beta_c}, {beta_q}], got {beta!r}")
    p = min(max((beta - beta_c) / (beta_q - beta_c), 0.0), 1.0)
    a, b = bell.optimal_angles(alpha)
    a0 = _flagged(bell.observable(a, 0), I2)
    a1 = _flagged(bell.observable(a, 1), I2)
    b0 = _flagged(bell.observable(b, 0), I2)
    b1 = _flagged(bell.observable(b, 1), I2)
    w = alpha * np.kron(a0, np.eye(4)) + np.kron(a0, b0 + b1) + np.kron(a1, b0 - b1)
    e00 = np.zeros((4, 4))
    e00[0, 0] = 1
    rho = p * _embed_flags(bell.optimal_state(alpha), 0) + (1 - p) * _embed_flags(e00, 1)
    return rho, w


def _embed_flags(block: np.ndarray, flag: int) -> np.ndarray:
    """|ff⟩⟨ff| ⊗ block, reordered to (flag_A A)(flag_B B)."""
    out = np.zeros((16, 16), dtype=complex)
    t = out.reshape(2, 2, 2, 2, 2, 2, 2, 2)
    t[flag, :, flag, :, flag, :, flag, :] = np.asarray(block).reshape(2, 2, 2, 2)
    return out


@dataclass(frozen=True)
class ProfileRow:
    beta: float
    search_lb: float
    cert_bound: float
    upper_bound: float


def violation_vs_extractability_profile(alpha: float, betas, cfg: SearchConfig = SearchConfig(),
                                        bound: Optional[bounds.BoundFunction] = None, tol: float = 1e-6) -> list:
    """Search lower bound next to the certified bound and the upper line for each β."""
    bound = bounds.BoundFunction.for_alpha(alpha) if bound is None else bound
    target = bell.optimal_state(alpha)
    rows = []
    for beta in betas:
        rho, w = profile_state(alpha, float(beta))
        got_beta = hs_inner(w, rho).real
        if abs(got_beta - beta) > 1e-9:
            raise RuntimeError(f"profile state scores {got_beta!r}, expected {beta!r}")
        lb = extractability_lower_bound(rho, target, (2, 2), cfg)
        cert = bound.f_nd(beta)
        if lb < cert - tol:
            raise RuntimeError(f"search value {lb!r} falls below the certified bound {cert!r} at beta={beta!r}")
        rows.append(ProfileRow(float(beta), lb, float(cert), float(bound.upper(beta))))
    return rows


def write_profile_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PROFILE_COLUMNS)
        for r in rows:
            w.writerow([f"{x:.17g}" for x in (r.beta, r.search_lb, r.cert_bound, r.upper_bound)])
