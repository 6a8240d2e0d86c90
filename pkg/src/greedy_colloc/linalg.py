"""Dense QR machinery for the greedy selector.

A :class:`QrFactor` stores an explicit thin orthogonal factor and the
upper-triangular factor with a sign-normalized (non-negative) diagonal, so
incremental updates and batch factorizations agree up to round-off.
Factors are immutable values: appends return new factors.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

__all__ = [
    "QrFactor",
    "NearSingularWarning",
    "qr_factor",
    "qr_append_columns",
    "qr_append_rows",
    "ls_solve",
    "minnorm_solve",
    "cond_estimate",
    "cond_of_prefix",
    "prefix_residual_scan",
]


class NearSingularWarning(UserWarning):
    """A triangular factor has a near-zero diagonal entry."""


@dataclass(frozen=True)
class QrFactor:
    q: np.ndarray  # m x n, orthonormal columns
    r: np.ndarray  # n x n, upper triangular, non-negative diagonal

    @property
    def row_count(self) -> int:
        return self.q.shape[0]

    @property
    def col_count(self) -> int:
        return self.q.shape[1]


def _sign_normalize(q: np.ndarray, r: np.ndarray):
    s = np.sign(np.diag(r))
    s[s == 0.0] = 1.0
    return q * s[None, :], s[:, None] * r


def qr_factor(a: np.ndarray) -> QrFactor:
    """Thin QR factorization of an m x n matrix with m >= n."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError("expected a 2-d array")
    m, n = a.shape
    if m < n:
        raise ValueError(f"need at least as many rows as columns, got {m} x {n}")
    if n == 0:
        return QrFactor(np.zeros((m, 0)), np.zeros((0, 0)))
    q, r = np.linalg.qr(a, mode="reduced")
    q, r = _sign_normalize(q, r)
    return QrFactor(q, r)


def qr_append_columns(f: QrFactor, new_cols: np.ndarray) -> QrFactor:
    """Factor of [A | B] from the factor of A, with re-orthogonalization."""
    b = np.asarray(new_cols, dtype=float)
    if b.ndim == 1:
        b = b[:, None]
    if b.shape[0] != f.row_count:
        raise ValueError("row count mismatch")
    if f.col_count + b.shape[1] > f.row_count:
        raise ValueError("appending these columns would make the matrix wide")
    if f.col_count == 0:
        return qr_factor(b)
    # Two classical Gram-Schmidt passes keep Q orthogonal to working precision.
    c1 = f.q.T @ b
    b1 = b - f.q @ c1
    c2 = f.q.T @ b1
    b2 = b1 - f.q @ c2
    c = c1 + c2
    q2, r2 = np.linalg.qr(b2, mode="reduced")
    q2, r2 = _sign_normalize(q2, r2)
    n, k = f.col_count, b.shape[1]
    r = np.zeros((n + k, n + k))
    r[:n, :n] = f.r
    r[:n, n:] = c
    r[n:, n:] = r2
    return QrFactor(np.hstack([f.q, q2]), r)


def qr_append_rows(f: QrFactor, new_rows: np.ndarray) -> QrFactor:
    """Factor of [A; B] (rows of B appended below A) from the factor of A."""
    b = np.asarray(new_rows, dtype=float)
    if b.ndim == 1:
        b = b[None, :]
    if b.shape[1] != f.col_count:
        raise ValueError("column count mismatch")
    k = b.shape[0]
    n = f.col_count
    if n == 0:
        return QrFactor(np.zeros((f.row_count + k, 0)), np.zeros((0, 0)))
    qt, rt = np.linalg.qr(np.vstack([f.r, b]), mode="reduced")
    qt, rt = _sign_normalize(qt, rt)
    q = np.vstack([f.q @ qt[:n, :], qt[n:, :]])
    return QrFactor(q, rt)


def _warn_if_near_singular(r: np.ndarray) -> None:
    d = np.abs(np.diag(r))
    if d.size and np.any(d < 1e-14 * d.max()):
        warnings.warn(
            "triangular factor is numerically singular; solve proceeds",
            NearSingularWarning,
            stacklevel=3,
        )


def ls_solve(f: QrFactor, b: np.ndarray) -> np.ndarray:
    """Least-squares solution of A eta = b from the factor of A."""
    b = np.asarray(b, dtype=float)
    if b.shape[0] != f.row_count:
        raise ValueError("right-hand side length mismatch")
    _warn_if_near_singular(f.r)
    return solve_triangular(f.r, f.q.T @ b, lower=False)


def minnorm_solve(f: QrFactor, rhs: np.ndarray) -> np.ndarray:
    """Minimum-norm solution of the transposed system A^T zeta = rhs.

    With A = QR this is zeta = Q (R^-T rhs): forward substitution with R^T
    followed by application of Q.
    """
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != f.col_count:
        raise ValueError("right-hand side length mismatch")
    _warn_if_near_singular(f.r)
    w = solve_triangular(f.r, rhs, lower=False, trans="T")
    return f.q @ w


def cond_estimate(f: QrFactor) -> float:
    """2-norm condition number of the factored matrix, exact via SVD of R."""
    return cond_of_prefix(f, f.col_count)


def cond_of_prefix(f: QrFactor, k: int) -> float:
    """Condition number of the matrix restricted to its first ``k`` columns.

    The leading k x k block of R is the triangular factor of the column
    prefix, so no refactorization is needed.
    """
    if k == 0:
        return 1.0
    sv = np.linalg.svd(f.r[:k, :k], compute_uv=False)
    if sv[-1] == 0.0:
        return np.inf
    return float(sv[0] / sv[-1])


def prefix_residual_scan(a: np.ndarray, b: np.ndarray, k_lo: int, k_hi: int):
    """Full-row least-squares residuals over column prefixes.

    For each prefix length k in [k_lo, k_hi], solves the least-squares
    problem over the first k columns of ``a`` (columns in selection order)
    and records the infinity norm of b - A[:, :k] @ lambda_k.  All prefixes
    share one QR factorization; each solve is a triangular solve.

    Returns a list of (k, inf_norm_residual).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not 1 <= k_lo <= k_hi <= a.shape[1]:
        raise ValueError("need 1 <= k_lo <= k_hi <= number of columns")
    f = qr_factor(a[:, :k_hi])
    c = f.q.T @ b
    out = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NearSingularWarning)
        for k in range(k_lo, k_hi + 1):
            lam = solve_triangular(f.r[:k, :k], c[:k], lower=False)
            res = b - a[:, :k] @ lam
            out.append((k, float(np.max(np.abs(res)))))
    return out
