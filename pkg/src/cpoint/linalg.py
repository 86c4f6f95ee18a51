"""Dense linear-algebra substrate for the portfolio solvers.

Givens rotations, QR factorization of a basis with single-column
replacement updates, triangular solves and Cholesky.  The orthogonal
factor Q is never stored: with B = Q R, any product Q'w is recovered as
R^{-T} (B' w), so every solve only needs R and the basis columns of the
source matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

# Column replacements tolerated before a full refactorization is forced
# to stop rotation round-off from accumulating in R.
REFACTOR_EVERY = 64


class SingularBasis(Exception):
    """Selected basis columns are numerically rank deficient."""


class NotPositiveDefinite(Exception):
    """Symmetric matrix has a nonpositive Cholesky pivot."""


def givens(v1: float, v2: float) -> tuple[float, float]:
    """Rotation (c, s) with c^2+s^2=1 zeroing the second component.

    Applied as (c*v1 - s*v2, s*v1 + c*v2) the pair becomes
    (+-hypot(v1, v2), 0).  Overflow-safe: the larger component is used
    as divisor.  (0, 0) and (x, 0) return the identity (1, 0).
    """
    if v2 == 0.0:
        return 1.0, 0.0
    if abs(v1) >= abs(v2):
        tau = -v2 / v1
        c = 1.0 / np.sqrt(1.0 + tau * tau)
        return c, c * tau
    tau = -v1 / v2
    s = 1.0 / np.sqrt(1.0 + tau * tau)
    return s * tau, s


@dataclass
class QrFactors:
    """Triangular factor of a column basis of a source matrix.

    r_factor is the square upper-triangular R of B = Q R where
    B = source[:, basis_columns]; Q is implicit.  Instances are values:
    updates return new objects.
    """

    r_factor: np.ndarray
    basis_columns: list[int]
    replacements: int = field(default=0)

    @property
    def size(self) -> int:
        return self.r_factor.shape[0]


def _pivot_tol(b: np.ndarray) -> float:
    norms = np.linalg.norm(b, axis=0)
    return 1e-12 * max(norms.max(initial=0.0), 1.0)


def qr_factor(source: np.ndarray, basis_columns: list[int] | None = None) -> QrFactors:
    """Factor the selected (square) column set by Givens rotations."""
    source = np.asarray(source, dtype=float)
    if basis_columns is None:
        basis_columns = list(range(source.shape[1]))
    b = source[:, basis_columns]
    m, n = b.shape
    if m != n:
        raise ValueError(f"basis must be square, got {m}x{n}")
    u = b.copy()
    for j in range(n - 1):
        for i in range(j + 1, n):
            if u[i, j] == 0.0:
                continue
            c, s = givens(u[j, j], u[i, j])
            rj = c * u[j, j:] - s * u[i, j:]
            ri = s * u[j, j:] + c * u[i, j:]
            u[j, j:] = rj
            u[i, j:] = ri
            u[i, j] = 0.0
    tol = _pivot_tol(b)
    if n and np.abs(np.diag(u)).min() <= tol:
        raise SingularBasis(f"diagonal pivot below tolerance {tol:.3e}")
    return QrFactors(u, list(basis_columns))


def solve_upper(r: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Back substitution R y = w."""
    n = r.shape[0]
    y = np.array(w, dtype=float)
    for i in range(n - 1, -1, -1):
        y[i] = (y[i] - r[i, i + 1:] @ y[i + 1:]) / r[i, i]
    return y

def solve_upper_t(r: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Forward substitution R' y = w."""
    n = r.shape[0]
    y = np.array(w, dtype=float)
    for i in range(n):
        y[i] = (y[i] - r[:i, i] @ y[:i]) / r[i, i]
    return y


def basis_matrix(f: QrFactors, source: np.ndarray) -> np.ndarray:
    return np.asarray(source, dtype=float)[:, f.basis_columns]


def qt_apply(f: QrFactors, source: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Q' w  =  R^{-T} (B' w)."""
    b = basis_matrix(f, source)
    return solve_upper_t(f.r_factor, b.T @ np.asarray(w, dtype=float))


def solve_basis(f: QrFactors, source: np.ndarray, w: np.ndarray) -> np.ndarray:
    """B y = w via y = R^{-1} Q' w."""
    return solve_upper(f.r_factor, qt_apply(f, source, w))


def solve_basis_t(f: QrFactors, source: np.ndarray, w: np.ndarray) -> np.ndarray:
    """B' y = w via y = Q R^{-T} w = B R^{-1} R^{-T} w."""
    b = basis_matrix(f, source)
    return b @ solve_upper(f.r_factor, solve_upper_t(f.r_factor, np.asarray(w, dtype=float)))


def qr_replace_column(
    f: QrFactors, source: np.ndarray, leaving_pos: int, entering_col: int
) -> QrFactors:
    """Replace the basis column at leaving_pos by source column entering_col.

    The updated basis ordering drops position leaving_pos and appends the
    entering column last; R is repaired with adjacent-row rotations
    instead of refactoring.  Every REFACTOR_EVERY replacements a fresh
    factorization is computed to shed accumulated rotation error.
    """
    source = np.asarray(source, dtype=float)
    kept = f.basis_columns[:leaving_pos] + f.basis_columns[leaving_pos + 1:]
    if entering_col in kept:
        raise SingularBasis(
            f"column {entering_col} already sits in the basis; the set would be rank deficient"
        )
    new_cols = kept + [entering_col]
    if f.replacements + 1 >= REFACTOR_EVERY:
        fresh = qr_factor(source, new_cols)
        return replace(fresh, replacements=0)

    m = f.size
    k = leaving_pos
    y = qt_apply(f, source, source[:, entering_col])
    u = np.empty_like(f.r_factor)
    u[:, :k] = f.r_factor[:, :k]
    u[:, k:m - 1] = f.r_factor[:, k + 1:]
    u[:, m - 1] = y
    # Rows k..m-1 are upper Hessenberg after the shift; chase the
    # subdiagonal with one rotation per row.
    for i in range(k, m - 1):
        c, s = givens(u[i, i], u[i + 1, i])
        if (c, s) != (1.0, 0.0):
            ri = c * u[i, i:] - s * u[i + 1, i:]
            rn = s * u[i, i:] + c * u[i + 1, i:]
            u[i, i:] = ri
            u[i + 1, i:] = rn
        u[i + 1, i] = 0.0
    tol = _pivot_tol(source[:, new_cols])
    if np.abs(np.diag(u)).min() <= tol:
        raise SingularBasis(f"replacement made basis singular (pivot <= {tol:.3e})")
    return QrFactors(u, new_cols, f.replacements + 1)


def cholesky(s: np.ndarray) -> np.ndarray:
    """Lower-triangular L with s = L L'.

    Raises NotPositiveDefinite when a pivot falls at or below the
    relative tolerance; the input is required symmetric.
    """
    s = np.asarray(s, dtype=float)
    n = s.shape[0]
    if s.shape != (n, n):
        raise ValueError("matrix must be square")
    if n and not np.allclose(s, s.T, atol=1e-12 * max(1.0, np.abs(s).max())):
        raise ValueError("matrix must be symmetric")
    tol = 1e-12 * max(1.0, np.abs(np.diag(s)).max(initial=0.0))
    low = np.zeros_like(s)
    for j in range(n):
        d = s[j, j] - low[j, :j] @ low[j, :j]
        if d <= tol:
            raise NotPositiveDefinite(f"pivot {d:.3e} at column {j}")
        low[j, j] = np.sqrt(d)
        low[j + 1:, j] = (s[j + 1:, j] - low[j + 1:, :j] @ low[j, :j]) / low[j, j]
    return low


def is_positive_definite(s: np.ndarray) -> bool:
    try:
        cholesky(s)
    except NotPositiveDefinite:
        return False
    return True
