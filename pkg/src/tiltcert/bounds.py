"""Self-testing bounds on extractability as functions of the Bell value.

The certified lower bound is the affine map f(β) = sβ + μ with constants from
:mod:`tiltcert.certifier`. Next to it sit the trivial level λ₀² (always
reachable by preparing a product state) and the mixture line through
(β_C, λ₀²) and (β_Q, 1), which no valid lower bound can exceed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import bell
from .certifier import BoundConstants, solve_constants

BETA_TOL = 1e-12
COMPARISON_COLUMNS = ("beta", "f_nd", "trivial", "upper")
EXTERNAL_COLUMNS = ("beta", "value")


def upper_bound(beta, lambda0_sq: float, beta_c: float, beta_q: float):
    """λ₀² + (1 - λ₀²)(β - β_C)/(β_Q - β_C): the line through the two extreme points."""
    beta = np.asarray(beta, dtype=float)
    _check_range(beta, beta_c, beta_q)
    out = lambda0_sq + (1 - lambda0_sq) * (beta - beta_c) / (beta_q - beta_c)
    return float(out) if out.ndim == 0 else out


def _check_range(beta: np.ndarray, lo: float, hi: float) -> None:
    if np.any(beta < lo - BETA_TOL) or np.any(beta > hi + BETA_TOL):
        raise ValueError(f"beta must lie in [{lo!r}, {hi!r}]")


@dataclass(frozen=True)
class BoundFunction:
    consts: BoundConstants
    beta_c: float
    beta_q: float
    lambda0_sq: float

    def __post_init__(self):
        if not self.beta_c < self.beta_q:
            raise ValueError("need beta_C < beta_Q")
        if not 0.5 - 1e-12 <= self.lambda0_sq < 1:
            raise ValueError(f"lambda0^2 must lie in [1/2, 1), got {self.lambda0_sq!r}")

    @classmethod
    def for_alpha(cls, alpha: float, consts: Optional[BoundConstants] = None) -> "BoundFunction":
        alpha = bell.check_alpha(alpha)
        consts = solve_constants(alpha) if consts is None else consts
        if consts.alpha != alpha:
            raise ValueError("constants solved for a different alpha")
        return cls(consts, bell.classical_value(alpha), bell.quantum_value(alpha), bell.largest_schmidt_sq(alpha))

    @property
    def alpha(self) -> float:
        return self.consts.alpha

    def _ret(self, out):
        return float(out) if np.ndim(out) == 0 else out

    def f(self, beta):
        """Affine bound sβ + μ."""
        beta = np.asarray(beta, dtype=float)
        _check_range(beta, self.beta_c, self.beta_q)
        return self._ret(self.consts.s * beta + self.consts.mu)

    def f_nd(self, beta):
        """Non-decreasing envelope sup_{x ∈ [β_C, β]} f(x).

        For an affine f the supremum sits at one of the two ends.
        """
        beta = np.asarray(beta, dtype=float)
        _check_range(beta, self.beta_c, self.beta_q)
        fb = self.consts.s * beta + self.consts.mu
        fc = self.consts.s * self.beta_c + self.consts.mu
        return self._ret(np.maximum(fb, fc))

    def certified(self, beta):
        """Best lower bound on extractability: max(f_nd(β), λ₀²)."""
        return self._ret(np.maximum(self.f_nd(beta), self.lambda0_sq))

    def upper(self, beta):
        return upper_bound(beta, self.lambda0_sq, self.beta_c, self.beta_q)


def threshold(bound: BoundFunction) -> float:
    """inf {β : f(β) > λ₀²}, clipped to [β_C, β_Q]."""
    s, mu = bound.consts.s, bound.consts.mu
    beta = (bound.lambda0_sq - mu) / s
    return float(min(max(beta, bound.beta_c), bound.beta_q))


@dataclass(frozen=True)
class ComparisonTable:
    alpha: float
    threshold: float
    beta: np.ndarray
    f_nd: np.ndarray
    trivial: np.ndarray
    upper: np.ndarray
    external: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.beta)


def emit_comparison(alpha: float, resolution: int = 101, external: Optional[np.ndarray] = None,
                    bound: Optional[BoundFunction] = None) -> ComparisonTable:
    """Bound curves sampled on ``resolution`` evenly spaced β in [β_C, β_Q]."""
    if int(resolution) != resolution or resolution < 2:
        raise ValueError(f"resolution must be an integer >= 2, got {resolution!r}")
    bound = BoundFunction.for_alpha(alpha) if bound is None else bound
    beta = np.linspace(bound.beta_c, bound.beta_q, int(resolution))
    return ComparisonTable(
        alpha=bound.alpha,
        threshold=threshold(bound),
        beta=beta,
        f_nd=bound.f_nd(beta),
        trivial=np.full_like(beta, bound.lambda0_sq),
        upper=bound.upper(beta),
        external=None if external is None else np.asarray(external, dtype=float),
    )


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def write_comparison_csv(table: ComparisonTable, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COMPARISON_COLUMNS)
        for row in zip(table.beta, table.f_nd, table.trivial, table.upper):
            w.writerow([_fmt(x) for x in row])


def write_external_csv(points: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EXTERNAL_COLUMNS)
        for beta, value in np.asarray(points, dtype=float).reshape(-1, 2):
            w.writerow([_fmt(beta), _fmt(value)])


def read_external_points(path) -> np.ndarray:
    """Parse whitespace-separated ``beta value`` lines; ``#`` starts a comment."""
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected two columns, got {len(parts)}")
            try:
                vals = [float(p) for p in parts]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric entry in {text!r}") from None
            if not all(np.isfinite(vals)):
                raise ValueError(f"{path}:{lineno}: non-finite entry")
            rows.append(vals)
    return np.array(rows, dtype=float).reshape(-1, 2)


def read_comparison_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != COMPARISON_COLUMNS:
        raise ValueError(f"{path}: unexpected header {rows[0] if rows else None!r}")
    return np.array([[float(x) for x in r] for r in rows[1:]])
