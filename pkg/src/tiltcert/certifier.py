"""Operator-inequality certificate T = K - sW - μ1 ⪰ 0 for the tilted CHSH family.

For each tilt α the constants (s, μ) are fixed by equalising the smallest
eigenvalue of K - sW at the corners of the angle square with the one at the
point of maximal violation; μ is that common value. The grid scan then checks
λ_min(T) over a rectangular grid of angles, α by α.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import bell
from .channels import DEFAULT_PROFILE, DampingProfile, k_operator, k_operator_batch
from .matcore import X, Z, jacobi_eigh, tensor

HALF_PI = np.pi / 2
QUARTER_PI = np.pi / 4
NORMALIZATION_TOL = 1e-8
S_BRACKET = (1e-3, 50.0)
S_REL_TOL = 1e-12
MAX_BRACKET_DOUBLINGS = 80

VERTICES = ((0.0, 0.0), (0.0, HALF_PI), (HALF_PI, 0.0), (HALF_PI, HALF_PI))

# U = (X+Z)/√2 ⊗ X maps T(π/2 - a, b) to T(a, b)
SYMMETRY_UNITARY = tensor((X + Z) / np.sqrt(2), X)

CSV_COLUMNS = ("alpha", "a_index", "b_index", "a", "b", "lambda_min")


class BracketError(RuntimeError):
    """The equalisation function did not change sign within the search range."""


@dataclass(frozen=True)
class BoundConstants:
    """Slope s and offset μ of the affine bound f(β) = sβ + μ at tilt α."""

    alpha: float
    s: float
    mu: float
    tol: float = field(default=NORMALIZATION_TOL, repr=False, compare=False)

    def __post_init__(self):
        bell.check_alpha(self.alpha)
        if not self.s > 0:
            raise ValueError(f"slope s must be positive, got {self.s!r}")
        dev = self.normalization_error
        if abs(dev) > self.tol:
            raise ValueError(f"s*beta_Q + mu deviates from 1 by {dev:.3e} (tol {self.tol:.1e})")

    @property
    def normalization_error(self) -> float:
        return self.s * bell.quantum_value(self.alpha) + self.mu - 1.0

    def f(self, beta):
        return self.s * np.asarray(beta, dtype=float) + self.mu


def _alpha_count(lo: float, hi: float, step: float) -> int:
    return int(math.floor((hi - lo) / step + 1e-9)) + 1


@dataclass(frozen=True)
class GridSpec:
    """α range (or an explicit list) plus node counts for the two angle grids.

    The a grid has ``a_points`` nodes spanning [0, π/4] inclusive and the b grid
    ``b_points`` nodes spanning [0, π/2] inclusive. The other half of the a
    range follows from the unitary symmetry of T.
    """

    alpha_min: float = 0.0
    alpha_max: float = 0.0
    alpha_step: float = 0.001
    a_points: int = 100
    b_points: int = 200
    alpha_values: Optional[tuple] = None

    def __post_init__(self):
        if self.alpha_values is not None:
            vals = tuple(float(a) for a in self.alpha_values)
            if not vals:
                raise ValueError("alpha_values must not be empty")
            for a in vals:
                bell.check_alpha(a)
            object.__setattr__(self, "alpha_values", vals)
        else:
            bell.check_alpha(self.alpha_min)
            bell.check_alpha(self.alpha_max)
            if self.alpha_max < self.alpha_min:
                raise ValueError("alpha_max must not be below alpha_min")
            if not self.alpha_step > 0:
                raise ValueError("alpha_step must be positive")
        for name in ("a_points", "b_points"):
            n = getattr(self, name)
            if int(n) != n or n < 2:
                raise ValueError(f"{name} must be an integer >= 2, got {n!r}")

    @classmethod
    def paper(cls) -> "GridSpec":
        return cls(alpha_min=0.0, alpha_max=1.999, alpha_step=0.001, a_points=100, b_points=200)

    @property
    def alphas(self) -> np.ndarray:
        if self.alpha_values is not None:
            return np.array(self.alpha_values)
        n = _alpha_count(self.alpha_min, self.alpha_max, self.alpha_step)
        return np.array([round(self.alpha_min + i * self.alpha_step, 12) for i in range(n)])

    @property
    def a_grid(self) -> np.ndarray:
        return np.linspace(0.0, QUARTER_PI, self.a_points)

    @property
    def b_grid(self) -> np.ndarray:
        return np.linspace(0.0, HALF_PI, self.b_points)

    @property
    def cells(self) -> int:
        return len(self.alphas) * self.a_points * self.b_points


@dataclass(frozen=True)
class AlphaMinimum:
    alpha: float
    a_index: int
    b_index: int
    a: float
    b: float
    lambda_min: float
    s: float
    mu: float


@dataclass(frozen=True)
class GridReport:
    global_min_eigenvalue: float
    argmin: tuple
    per_alpha_minima: tuple
    cells_evaluated: int
    cell_minima: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def minima_array(self) -> np.ndarray:
        """Per-α minima as an (n, 6) array in :data:`CSV_COLUMNS` order."""
        return np.array([[m.alpha, m.a_index, m.b_index, m.a, m.b, m.lambda_min] for m in self.per_alpha_minima])


# --- operators --------------------------------------------------------------


def t_operator(alpha: float, a: float, b: float, consts: BoundConstants,
               profile: DampingProfile = DEFAULT_PROFILE) -> np.ndarray:
    """T_α(a, b) = K - sW - μ1 as a complex 4×4 matrix (reference route)."""
    alpha = bell.check_alpha(alpha)
    if consts.alpha != alpha:
        raise ValueError(f"constants were solved for alpha={consts.alpha!r}, not {alpha!r}")
    w = bell.bell_operator(bell.BellRealization(alpha, a, b))
    k = k_operator(alpha, a, b, profile)
    return k - consts.s * w - consts.mu * np.eye(4)


def t_operator_batch(alpha: float, a, b, s: float, mu: float,
                     profile: DampingProfile = DEFAULT_PROFILE) -> np.ndarray:
    """Real T operators for broadcast angle arrays, shape (..., 4, 4)."""
    k = k_operator_batch(alpha, a, b, profile)
    w = bell.bell_operator_batch(alpha, a, b)
    return k - s * w - mu * np.eye(4)


def _special_points(alpha: float) -> tuple[np.ndarray, np.ndarray]:
    b_star = bell.optimal_angles(alpha)[1]
    pts = list(VERTICES) + [(QUARTER_PI, b_star)]
    return np.array([p[0] for p in pts]), np.array([p[1] for p in pts])


def special_point_minima(alpha: float, s: float, profile: DampingProfile = DEFAULT_PROFILE) -> np.ndarray:
    """λ_min(K - sW) at the four corners and at (π/4, b*), in that order."""
    alpha = bell.check_alpha(alpha)
    if s < 0:
        raise ValueError(f"s must be non-negative, got {s!r}")
    a, b = _special_points(alpha)
    m = k_operator_batch(alpha, a, b, profile) - s * bell.bell_operator_batch(alpha, a, b)
    return jacobi_eigh(m)[0][:, 0]


# --- solving for the constants ---------------------------------------------

# Generic mixing weight for the joint diagonalisation; any value that keeps
# distinct (k, w) eigenpairs apart works.
_MIX = 0.6180339887498949


def _joint_spectra(alpha: float, profile: DampingProfile) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalue pairs (k_i, w_i) of the commuting K and W at the special points.

    At the corners both parties' operators are diagonal in the same Pauli
    basis, and at the optimum Φ_α is an eigenvector of W, so K and W share an
    eigenbasis. Then λ_min(K - sW) = min_i (k_i - s w_i) for every s.
    """
    a, b = _special_points(alpha)
    k = k_operator_batch(alpha, a, b, profile)
    w = bell.bell_operator_batch(alpha, a, b)
    comm = np.abs(k @ w - w @ k).max()
    if comm > 1e-12:
        raise RuntimeError(f"K and W fail to commute at a special point (|[K, W]| = {comm:.2e})")
    _, v = jacobi_eigh(k + _MIX * w, vectors=True)
    vt = np.swapaxes(v, -1, -2)
    kd = np.einsum("pii->pi", vt @ k @ v)
    wd = np.einsum("pii->pi", vt @ w @ v)
    return kd, wd


def _min_lines(kd: np.ndarray, wd: np.ndarray, s: float) -> np.ndarray:
    return np.min(kd - s * wd, axis=-1)


def _normalization_onset(k_opt: np.ndarray, w_opt: np.ndarray, beta_q: float) -> float:
    """Smallest s from which the Φ_α line 1 - sβ_Q is the lowest at the optimum.

    Below it λ_min(K - sW) at the optimum comes from another eigenvector and
    the bound cannot reach 1 at β_Q. Slightly inflated to stay clear of the
    crossing.
    """
    top = int(np.argmax(w_opt))
    onset = 0.0
    for i in range(len(w_opt)):
        if i != top:
            onset = max(onset, (k_opt[top] - k_opt[i]) / (w_opt[top] - w_opt[i]))
    return onset * (1 + 1e-9)


def solve_constants(alpha: float, profile: DampingProfile = DEFAULT_PROFILE,
                    bracket: tuple = S_BRACKET, rel_tol: float = S_REL_TOL) -> BoundConstants:
    """Equalise λ_min(K - sW) over the corners with the value at the optimum.

    Only s at which the optimum's smallest eigenvalue is 1 - sβ_Q are
    admissible (otherwise f(β_Q) < 1), so the lower bracket end is raised to
    that onset. Bisection then runs on d(s) = min_corners λ_min - λ_min(optimum),
    which is negative at the onset and positive once s is large enough; the
    smallest such root gives the strongest bound. The upper end of the bracket
    is doubled until d changes sign, because the equalising s grows without
    bound as α → 2. Stops when the bracket is narrower than
    ``rel_tol * max(1, s)``. The returned s is the upper bracket end, so the
    corner values are not below μ.
    """
    alpha = bell.check_alpha(alpha)
    kd, wd = _joint_spectra(alpha, profile)

    def d(s):
        vals = _min_lines(kd, wd, s)
        return vals[:4].min() - vals[4]

    lo, hi = map(float, bracket)
    if not 0 < lo < hi:
        raise ValueError(f"invalid bracket {bracket!r}")
    lo = max(lo, _normalization_onset(kd[4], wd[4], bell.quantum_value(alpha)))
    hi = max(hi, 2 * lo)
    d_lo = d(lo)
    if d_lo >= 0:
        raise BracketError(f"alpha={alpha}: d(s) = {d_lo:.3e} >= 0 at the lower bracket end s = {lo}")
    for _ in range(MAX_BRACKET_DOUBLINGS):
        if d(hi) >= 0:
            break
        lo, hi = hi, 2 * hi
    else:
        raise BracketError(f"alpha={alpha}: d(s) still negative at s = {hi:.3e}")
    while hi - lo > rel_tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if d(mid) < 0:
            lo = mid
        else:
            hi = mid
    s = float(hi)
    mu = float(_min_lines(kd, wd, s)[4])
    return BoundConstants(alpha=alpha, s=s, mu=mu)


def threshold_violation(consts: BoundConstants, level: float = 0.5) -> float:
    """β at which the affine bound sβ + μ reaches ``level``."""
    return (level - consts.mu) / consts.s


# --- grid scan ----------------------------------------------------------------


def _scan_alpha(alpha: float, a_grid: np.ndarray, b_grid: np.ndarray, full: bool,
                profile: DampingProfile = DEFAULT_PROFILE):
    consts = solve_constants(alpha, profile)
    aa, bb = np.meshgrid(a_grid, b_grid, indexing="ij")
    t = t_operator_batch(alpha, aa, bb, consts.s, consts.mu, profile)
    lam = jacobi_eigh(t)[0][..., 0]
    flat = int(np.argmin(lam))  # first occurrence: lowest cell index on ties
    ia, ib = divmod(flat, len(b_grid))
    best = AlphaMinimum(
        alpha=float(alpha), a_index=ia, b_index=ib, a=float(a_grid[ia]), b=float(b_grid[ib]),
        lambda_min=float(lam[ia, ib]), s=consts.s, mu=consts.mu,
    )
    return best, (lam if full else None)


def _scan_chunk(args):
    alphas, a_grid, b_grid, full = args
    return [_scan_alpha(al, a_grid, b_grid, full) for al in alphas]


def default_workers() -> int:
    env = os.environ.get("TILTCERT_THREADS")
    if env:
        n = int(env)
        if n < 1:
            raise ValueError(f"TILTCERT_THREADS must be >= 1, got {env!r}")
        return n
    return os.cpu_count() or 1


def grid_scan(spec: GridSpec, workers: Optional[int] = None, full: bool = False,
              chunk_size: int = 8) -> GridReport:
    """λ_min(T) at every grid cell, reduced to per-α and global minima.

    Each α is solved and scanned independently; the result does not depend on
    ``workers`` or ``chunk_size``. Ties in the global minimum go to the
    smallest (α index, a index, b index).
    """
    workers = default_workers() if workers is None else int(workers)
    if workers < 1:
        raise ValueError("workers must be >= 1")
    alphas = spec.alphas
    a_grid, b_grid = spec.a_grid, spec.b_grid
    chunks = [(alphas[i:i + chunk_size], a_grid, b_grid, full) for i in range(0, len(alphas), chunk_size)]
    if workers == 1 or len(chunks) == 1:
        results = [r for c in chunks for r in _scan_chunk(c)]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = [r for rs in ex.map(_scan_chunk, chunks) for r in rs]
    minima = tuple(r[0] for r in results)
    key = min(range(len(minima)), key=lambda i: (minima[i].lambda_min, i, minima[i].a_index, minima[i].b_index))
    best = minima[key]
    cell = np.stack([r[1] for r in results]) if full else None
    return GridReport(
        global_min_eigenvalue=best.lambda_min,
        argmin=(best.alpha, best.a, best.b),
        per_alpha_minima=minima,
        cells_evaluated=len(alphas) * len(a_grid) * len(b_grid),
        cell_minima=cell,
    )


def recompute_cell(alpha: float, a: float, b: float, profile: DampingProfile = DEFAULT_PROFILE) -> float:
    """λ_min(T) at one cell through the same batched path the scan uses."""
    consts = solve_constants(alpha, profile)
    t = t_operator_batch(alpha, np.array([a]), np.array([b]), consts.s, consts.mu, profile)
    return float(jacobi_eigh(t)[0][0, 0])


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def write_report_csv(report: GridReport, path, spec: Optional[GridSpec] = None) -> None:
    """One row per α minimum; with ``spec`` and a full report, one row per cell."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        if report.cell_minima is not None and spec is not None:
            a_grid, b_grid = spec.a_grid, spec.b_grid
            for m, lam in zip(report.per_alpha_minima, report.cell_minima):
                for ia, a in enumerate(a_grid):
                    for ib, b in enumerate(b_grid):
                        w.writerow([_fmt(m.alpha), ia, ib, _fmt(a), _fmt(b), _fmt(lam[ia, ib])])
        else:
            for m in report.per_alpha_minima:
                w.writerow([_fmt(m.alpha), m.a_index, m.b_index, _fmt(m.a), _fmt(m.b), _fmt(m.lambda_min)])


def read_report_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise ValueError(f"{path}: unexpected header {rows[0] if rows else None!r}")
    return np.array([[float(x) for x in r] for r in rows[1:]])
