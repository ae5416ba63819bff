"""Dense real-matrix kernel for small control problems.

Everything here is sized for state/control dimensions up to a few dozen;
no sparse formats, no general nonsymmetric eigensolvers.  All operations
are pure functions of immutable inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "Tolerances",
    "DEFAULT_TOLERANCES",
    "NonSquareError",
    "NoConvergenceError",
    "AllZeroError",
    "PowerOverflowError",
    "CholeskyCheck",
    "SingularExtremes",
    "as_matrix",
    "as_vector",
    "symmetrize",
    "cholesky_pd",
    "sym_eig",
    "singular_extremes",
    "spectral_radius_est",
    "solve_linear",
    "two_norm",
]


@dataclass(frozen=True)
class Tolerances:
    """Centralized numerical tolerances.

    pd_pivot: smallest Cholesky pivot still counted as positive.
    symmetry: allowed asymmetry before a matrix is rejected as non-symmetric.
    mat_eq: entrywise tolerance for matrix-equality checks.
    spectral_margin: required gap below 1 for closed-loop spectral radii.
    """

    pd_pivot: float = 1e-10
    symmetry: float = 1e-8
    mat_eq: float = 1e-8
    spectral_margin: float = 1e-6


DEFAULT_TOLERANCES = Tolerances()


class NonSquareError(ValueError):
    """Raised when an operation needs a square matrix and got something else."""


class NoConvergenceError(RuntimeError):
    """Symmetric eigensolve failed to converge."""


class AllZeroError(ValueError):
    """Matrix is numerically zero where a positive singular value is required."""


class PowerOverflowError(ArithmeticError):
    """Norm scaling broke down during the spectral radius power estimate."""


class CholeskyCheck(NamedTuple):
    is_pd: bool
    min_pivot: float


class SingularExtremes(NamedTuple):
    sigma_max: float
    sigma_min_pos: float


def as_matrix(a, rows: int | None = None, cols: int | None = None, *, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite float64 2-D array, optionally pinning the shape."""
    m = np.array(a, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"{name}: expected a 2-D array, got ndim={m.ndim}")
    if rows is not None and m.shape[0] != rows:
        raise ValueError(f"{name}: expected {rows} rows, got {m.shape[0]}")
    if cols is not None and m.shape[1] != cols:
        raise ValueError(f"{name}: expected {cols} columns, got {m.shape[1]}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name}: entries must be finite")
    return m


def as_vector(a, length: int | None = None, *, name: str = "vector") -> np.ndarray:
    v = np.array(a, dtype=float).reshape(-1)
    if length is not None and v.shape[0] != length:
        raise ValueError(f"{name}: expected length {length}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name}: entries must be finite")
    return v


def _require_square(m, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NonSquareError(f"{name}: expected a square matrix, got shape {m.shape}")
    return m


def symmetrize(m) -> np.ndarray:
    """(M + M') / 2."""
    m = np.asarray(m, dtype=float)
    return (m + m.T) / 2.0


def two_norm(m) -> float:
    """Spectral norm for matrices, Euclidean norm for vectors."""
    a = np.asarray(m, dtype=float)
    if a.ndim <= 1:
        return float(np.linalg.norm(a))
    return float(np.linalg.norm(a, 2))


def cholesky_pd(m, tol: float | None = None) -> CholeskyCheck:
    """Positive-definiteness check with the smallest pivot as a margin.

    The input is symmetrized as (M + M')/2 before factoring.  is_pd is true
    iff every pivot exceeds tol; the factorization stops at the first
    failing pivot, whose value is still reported.
    """
    m = _require_square(m, "cholesky_pd")
    if tol is None:
        tol = DEFAULT_TOLERANCES.pd_pivot
    s = symmetrize(m)
    n = s.shape[0]
    if n == 0:
        return CholeskyCheck(True, math.inf)
    lower = np.zeros((n, n))
    min_pivot = math.inf
    for i in range(n):
        pivot = s[i, i] - lower[i, :i] @ lower[i, :i]
        min_pivot = min(min_pivot, float(pivot))
        if not pivot > tol:
            return CholeskyCheck(False, min_pivot)
        lower[i, i] = math.sqrt(pivot)
        if i + 1 < n:
            lower[i + 1:, i] = (s[i + 1:, i] - lower[i + 1:, :i] @ lower[i, :i]) / lower[i, i]
    return CholeskyCheck(True, min_pivot)


def sym_eig(m) -> np.ndarray:
    """Eigenvalues of the symmetrized input, ascending."""
    s = symmetrize(_require_square(m, "sym_eig"))
    try:
        return np.linalg.eigvalsh(s)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK rarely fails at this size
        raise NoConvergenceError(str(exc)) from exc


def singular_extremes(m, tol: float = 1e-10) -> SingularExtremes:
    """Largest singular value and smallest singular value above tol."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2:
        raise ValueError("singular_extremes: expected a 2-D array")
    s = np.linalg.svd(a, compute_uv=False)
    positive = s[s > tol]
    if positive.size == 0:
        raise AllZeroError("singular_extremes: matrix is numerically zero")
    return SingularExtremes(float(s[0]), float(positive[-1]))


def spectral_radius_est(m) -> float:
    """Spectral radius estimate ||M^128||^(1/128).

    Powers are formed by 7 repeated squarings with per-step norm scaling, so
    the estimate never overflows; the scale is tracked in log space.  Good to
    about a percent on well-conditioned eigenbases, which is all the
    stability verdicts here need.
    """
    a = _require_square(m, "spectral_radius_est")
    if a.shape[0] == 0:
        return 0.0
    norm = float(np.linalg.norm(a, 2))
    if norm == 0.0:
        return 0.0
    log_scale = math.log(norm)
    b = a / norm
    for _ in range(7):
        b = b @ b
        norm = float(np.linalg.norm(b, 2))
        if not math.isfinite(norm):
            raise PowerOverflowError("spectral_radius_est: scaling broke down")
        if norm == 0.0:
            return 0.0
        log_scale = 2.0 * log_scale + math.log(norm)
        b = b / norm
    return math.exp(log_scale / 128.0)


def solve_linear(a, b) -> np.ndarray:
    """Solve A X = B by LU with partial pivoting (stacked right-hand sides)."""
    a = _require_square(a, "solve_linear")
    return np.linalg.solve(a, np.asarray(b, dtype=float))
