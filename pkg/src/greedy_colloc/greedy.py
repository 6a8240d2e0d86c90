"""Block-greedy column-subspace selection with time-step-matched tolerances.

Given an m x n system A lam = b, the selector grows row and column index
sets in roughly doubling batches, steered by the primal and dual residuals
of the constrained least-squares subproblem

    min 1/2 eta^T eta   s.t.  A(rows, cols) eta = b(rows).

Two stopping-rule variants are provided.  The classic rules stop on an
ill-conditioned expansion (backtracking by bisection to the largest column
prefix whose condition number stays below the cap) or on a small primal
residual.  The refined rules replace both endings with searches of the
all-rows residual curve: on ill-conditioning, the prefix of the freshly
added columns minimizing the full-row residual is returned; on a small
residual, the shortest prefix whose full-row residual reaches the target
tau_r' is kept.  Tolerances are derived from the time step so the spatial
approximation power matches the temporal error of a second-order scheme:
tau_kappa = eps_mach / dt, tau_r = dt, tau_r' = dt**2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from greedy_colloc.linalg import (
    QrFactor,
    cond_of_prefix,
    ls_solve,
    minnorm_solve,
    prefix_residual_scan,
    qr_append_columns,
    qr_append_rows,
    qr_factor,
)
from greedy_colloc.validation import check_matrix, check_vector

EPS_MACH = float(np.finfo(np.float64).eps)  # 2**-52

__all__ = [
    "EPS_MACH",
    "Tolerances",
    "tolerances_from_dt",
    "default_tolerances",
    "Termination",
    "ResidualPair",
    "GreedySelection",
    "residual_pair",
    "initialize_selection",
    "expand_block",
    "select_subspace_original",
    "select_subspace_new",
    "GreedyColumnSelector",
]


@dataclass(frozen=True)
class Tolerances:
    """Stopping tolerances: condition cap 1/tau_kappa, residual tau_r, target tau_r_prime."""

    tau_kappa: float
    tau_r: float
    tau_r_prime: float

    def __post_init__(self):
        if not 0 < self.tau_kappa <= 1:
            raise ValueError("tau_kappa must lie in (0, 1]")
        if self.tau_r <= 0 or self.tau_r_prime <= 0:
            raise ValueError("residual tolerances must be positive")
        if self.tau_r_prime > self.tau_r:
            raise ValueError("tau_r_prime must not exceed tau_r")


def tolerances_from_dt(dt: float) -> Tolerances:
    """Time-step-matched tolerances with unit leading constants."""
    if not 0 < dt <= 1:
        raise ValueError(f"dt must lie in (0, 1], got {dt}")
    return Tolerances(tau_kappa=EPS_MACH / dt, tau_r=dt, tau_r_prime=dt * dt)


def default_tolerances() -> Tolerances:
    """Machine-epsilon tolerances of the classic selector."""
    return Tolerances(tau_kappa=EPS_MACH, tau_r=EPS_MACH, tau_r_prime=EPS_MACH)


class Termination(Enum):
    ALL_COLUMNS = "AllColumns"
    SC1 = "SC1"
    SC2 = "SC2"
    SC1_PRIME = "SC1Prime"
    SC2_PRIME = "SC2Prime"


@dataclass(frozen=True)
class ResidualPair:
    primal: np.ndarray  # over all rows
    dual: np.ndarray  # over all columns; vanishes on selected columns


@dataclass
class GreedySelection:
    """Result of a greedy run: ordered index sets plus a termination record.

    Condition numbers carry whatever the variant's stopping rule ran on:
    exact subsystem values for the classic rules, cheap triangular-diagonal
    estimates of the all-rows restriction (lower bounds of the true
    condition number) for the refined rules.
    """

    rows: list[int]
    cols: list[int]
    termination: Termination
    final_condition: float
    final_full_row_residual_inf: float
    iteration_log: list[tuple] = field(default_factory=list)
    # log rows are (n_rows, n_cols, kappa, res_inf_selected, res_inf_fullrow)

    def log_to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("iter,rows,cols,kappa,res_inf_selected,res_inf_fullrow\n")
            for i, (nr, nc, kap, rs, rf) in enumerate(self.iteration_log):
                fh.write(f"{i},{nr},{nc},{kap!r},{rs!r},{rf!r}\n")


def _residuals_from_factor(a, b, rows, cols, factor):
    eta = ls_solve(factor, b[rows])
    zeta = minnorm_solve(factor, -eta)
    primal = a[:, cols] @ eta - b
    dual = np.zeros(a.shape[1])
    dual[cols] = eta
    dual += a[rows, :].T @ zeta
    return ResidualPair(primal=primal, dual=dual), eta


def residual_pair(a, rows, cols, b) -> ResidualPair:
    """Primal and dual residuals of the selected subsystem.

    eta solves the selected least-squares problem, zeta the transposed
    system A(rows, cols)^T zeta = -eta; the primal residual spans all rows,
    the dual residual all columns (zero-extended eta plus A(rows, :)^T zeta).
    """
    a = check_matrix(a)
    b = check_vector(b, a.shape[0])
    rows = list(rows)
    cols = list(cols)
    if not cols or not rows or len(rows) < len(cols):
        raise ValueError("need a non-empty selection with at least as many rows as columns")
    factor = qr_factor(a[np.ix_(rows, cols)])
    pair, _ = _residuals_from_factor(a, b, rows, cols, factor)
    return pair


def initialize_selection(a, b):
    """Seed row and column: largest |b| entry, then largest |A(row, j) * b(row)|."""
    a = check_matrix(a)
    b = check_vector(b, a.shape[0])
    if np.all(b == 0.0):
        raise ValueError("right-hand side is zero: nothing to approximate")
    i0 = int(np.argmax(np.abs(b)))
    j0 = int(np.argmax(np.abs(a[i0, :] * b[i0])))
    return [i0], [j0]


def _ordered_candidates(magnitudes, taken_mask, count):
    idx = np.flatnonzero(~taken_mask)
    order = idx[np.argsort(-np.abs(magnitudes[idx]), kind="stable")]
    return [int(i) for i in order[:count]]


ROW_OVERSAMPLING = 3.0


def expand_block(a, b, rows, cols, residuals: ResidualPair,
                 row_oversampling: float | None = None):
    """One doubling batch: columns by dual residual, rows by primal residual.

    The column count doubles (capped at n).  The row count doubles, floored
    at ``row_oversampling`` times the new column count (capped at m; default
    ROW_OVERSAMPLING): the oversampled rows keep the subsystem's condition
    number representative of the full-row column conditioning, which the
    stopping rules rely on.  New indices are appended in order of decreasing
    residual magnitude, ties broken by smaller index.
    """
    if row_oversampling is None:
        row_oversampling = ROW_OVERSAMPLING
    m, n = a.shape
    if len(cols) >= n:
        raise ValueError("all columns already selected")
    col_mask = np.zeros(n, dtype=bool)
    col_mask[cols] = True
    add_cols = _ordered_candidates(residuals.dual, col_mask, min(len(cols), n - len(cols)))
    new_cols = cols + add_cols
    floor = int(np.ceil(row_oversampling * len(new_cols)))
    row_target = min(max(2 * len(rows), floor), m)
    row_mask = np.zeros(m, dtype=bool)
    row_mask[rows] = True
    add_rows = _ordered_candidates(residuals.primal, row_mask, row_target - len(rows))
    return rows + add_rows, new_cols


def _full_row_residual_inf(a, cols, b) -> float:
    scan = prefix_residual_scan(a[:, cols], b, len(cols), len(cols))
    return scan[0][1]


def _prefix_condition_estimates(factor: QrFactor) -> np.ndarray:
    """Cheap per-prefix condition estimates from the triangular diagonal.

    The ratio max|r_ii| / min|r_ii| over the first k diagonal entries bounds
    the condition number of the column prefix from below and is monotone
    non-decreasing in k, so backtracking below the cap is an exact scan.
    An exactly zero diagonal entry (rank deficiency) maps to infinity.
    """
    d = np.abs(np.diag(factor.r))
    if d.size == 0:
        return np.zeros(0)
    hi = np.maximum.accumulate(d)
    lo = np.minimum.accumulate(d)
    with np.errstate(divide="ignore", invalid="ignore"):
        est = np.where(lo > 0.0, hi / lo, np.inf)
    return est


def _bisect_exact_condition_prefix(factor: QrFactor, cap: float) -> int:
    """Largest column-prefix length whose exact condition number is <= cap.

    With the row set fixed, removing trailing columns cannot decrease the
    smallest singular value or increase the largest, so the prefix condition
    number is monotone in the prefix length and bisection is exact.
    """
    lo, hi = 1, factor.col_count
    if cond_of_prefix(factor, lo) > cap:
        return lo
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if cond_of_prefix(factor, mid) <= cap:
            lo = mid
        else:
            hi = mid
    return lo


def _greedy_loop(a, b, tol: Tolerances, refined: bool) -> GreedySelection:
    a = check_matrix(a)
    b = check_vector(b, a.shape[0])
    m, n = a.shape
    cap = 1.0 / tol.tau_kappa
    rows, cols = initialize_selection(a, b)
    factor = qr_factor(a[np.ix_(rows, cols)])
    # The classic rules gauge conditioning exactly (SVD of the subsystem
    # triangle).  The refined rules run on the cheap diagonal estimate of
    # the all-rows restriction A(:, cols): the stepping phase solves with
    # all rows, subsystem estimates suffer transient spikes while the row
    # batches lag the column growth, and the exact condition number would
    # veto selections deep enough to resolve stiff reaction systems.
    full_factor = qr_factor(a[:, cols]) if refined else None

    def current_condition() -> float:
        if refined:
            return float(_prefix_condition_estimates(full_factor)[-1])
        return cond_of_prefix(factor, len(cols))

    log = []
    termination = None
    final_res = None

    while True:
        if len(cols) >= n:
            termination = Termination.ALL_COLUMNS
            break
        pair, eta = _residuals_from_factor(a, b, rows, cols, factor)
        res_full = float(np.max(np.abs(pair.primal)))
        res_sel = float(np.max(np.abs(pair.primal[rows])))
        log.append((len(rows), len(cols), current_condition(), res_sel, res_full))

        if res_full < tol.tau_r:
            if refined:
                scan = prefix_residual_scan(a[:, cols], b, 1, len(cols))
                keep = None
                for k, res in scan:
                    if res <= tol.tau_r_prime:
                        keep = (k, res)
                        break
                if keep is None:
                    keep = scan[-1]
                cols = cols[: keep[0]]
                final_res = keep[1]
                termination = Termination.SC2_PRIME
            else:
                termination = Termination.SC2
            break

        prev_len = len(cols)
        rows_new, cols_new = expand_block(a, b, rows, cols, pair)
        factor = qr_append_rows(factor, a[np.ix_(rows_new[len(rows) :], cols)])
        factor = qr_append_columns(factor, a[np.ix_(rows_new, cols_new[prev_len:])])
        if refined:
            full_factor = qr_append_columns(full_factor, a[:, cols_new[prev_len:]])
        rows, cols = rows_new, cols_new

        if current_condition() > cap:
            if refined:
                scan = prefix_residual_scan(a[:, cols], b, prev_len + 1, len(cols))
                residues = [res for _, res in scan]
                best = int(np.argmin(residues))
                cols = cols[: scan[best][0]]
                final_res = scan[best][1]
                termination = Termination.SC1_PRIME
            else:
                cols = cols[: _bisect_exact_condition_prefix(factor, cap)]
                termination = Termination.SC1
            break

    if refined:
        final_cond = float(_prefix_condition_estimates(full_factor)[len(cols) - 1])
    else:
        final_cond = cond_of_prefix(factor, len(cols))
    if final_res is None:
        final_res = _full_row_residual_inf(a, cols, b)
    return GreedySelection(
        rows=rows,
        cols=cols,
        termination=termination,
        final_condition=final_cond,
        final_full_row_residual_inf=final_res,
        iteration_log=log,
    )


def select_subspace_original(a, b, tol: Tolerances) -> GreedySelection:
    """Block-greedy selection with the classic stopping rules.

    Stops when the expanded subsystem's condition number exceeds the cap
    (backtracking by bisection to the largest admissible column prefix) or
    when the primal residual drops below tau_r.
    """
    return _greedy_loop(a, b, tol, refined=False)


def select_subspace_new(a, b, tol: Tolerances) -> GreedySelection:
    """Block-greedy selection with the residual-search stopping rules.

    On ill-conditioning, returns the prefix of the newly added columns whose
    all-rows least-squares residual is smallest; on a small residual,
    backtracks to the shortest prefix with all-rows residual at or below
    tau_r_prime (keeping everything if even the full selection misses it).
    """
    return _greedy_loop(a, b, tol, refined=True)


class GreedyColumnSelector:
    """Estimator-style interface around the greedy column selection.

    Parameters
    ----------
    dt : float, optional
        Time step from which tolerances are derived (tau_kappa=eps/dt,
        tau_r=dt, tau_r'=dt**2).  Ignored when ``tolerances`` is given.
    tolerances : Tolerances, optional
        Explicit stopping tolerances.  When neither ``dt`` nor
        ``tolerances`` is given, machine-epsilon defaults are used.
    variant : {"new", "original"}
        Stopping-rule family.

    Attributes (after ``fit``)
    --------------------------
    rows_, cols_ : selected index lists in selection order.
    termination_ : Termination enum member.
    final_condition_, final_residual_ : conditioning and all-rows residual
        of the returned selection.
    """

    def __init__(self, dt=None, tolerances=None, variant="new"):
        self.dt = dt
        self.tolerances = tolerances
        self.variant = variant

    def get_params(self, deep=True):
        return {"dt": self.dt, "tolerances": self.tolerances, "variant": self.variant}

    def set_params(self, **params):
        for key, value in params.items():
            if key not in ("dt", "tolerances", "variant"):
                raise ValueError(f"unknown parameter {key!r}")
            setattr(self, key, value)
        return self

    def _resolve_tolerances(self) -> Tolerances:
        if self.tolerances is not None:
            return self.tolerances
        if self.dt is not None:
            return tolerances_from_dt(self.dt)
        return default_tolerances()

    def fit(self, a, b):
        a = check_matrix(a)
        b = check_vector(b, a.shape[0])
        if self.variant not in ("new", "original"):
            raise ValueError(f"unknown variant {self.variant!r}")
        select = select_subspace_new if self.variant == "new" else select_subspace_original
        sel = select(a, b, self._resolve_tolerances())
        self.selection_ = sel
        self.rows_ = sel.rows
        self.cols_ = sel.cols
        self.termination_ = sel.termination
        self.final_condition_ = sel.final_condition
        self.final_residual_ = sel.final_full_row_residual_inf
        self.n_features_in_ = a.shape[1]
        return self

    def transform(self, a):
        if not hasattr(self, "cols_"):
            raise RuntimeError("selector has not been fitted")
        a = check_matrix(a)
        if a.shape[1] != self.n_features_in_:
            raise ValueError("column count differs from the fitted matrix")
        return a[:, self.cols_]

    def fit_transform(self, a, b):
        return self.fit(a, b).transform(a)

    def get_support(self, indices: bool = False):
        if not hasattr(self, "cols_"):
            raise RuntimeError("selector has not been fitted")
        if indices:
            return list(self.cols_)
        mask = np.zeros(self.n_features_in_, dtype=bool)
        mask[self.cols_] = True
        return mask
