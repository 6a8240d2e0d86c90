"""Time stepping for parabolic problems on kernel trial spaces.

The PDE is semi-discretized in time (Crank-Nicolson or semi-implicit BDF)
and collocated in space on a fixed trial space of kernel translates, giving
one stationary matrix per scheme and time step:

    CN     : (2 Phi - dt D lap Phi) lam^k = 2 U^{k-1} + dt (f^k + D lap U^{k-1} + f^{k-1})
    SBDF1  : (Phi - dt D lap Phi) lam^k = U^{k-1} + dt f^{k-1}
    SBDF2  : (3 Phi - 2 dt D lap Phi) lam^k = 4 U^{k-1} - U^{k-2} + 2 dt (2 f^{k-1} - f^{k-2})

plus Dirichlet rows Phi lam^k = g^k on boundary collocation points.  The
matrix is factored once and reused for every step; history terms are
evaluated analytically from the coefficient expansion.  SBDF2 takes its
first step with SBDF1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from greedy_colloc.geometry import PointCloud
from greedy_colloc.kernels import KernelSpec, MatrixOp, assemble_matrix, assemble_ops
from greedy_colloc.greedy import (
    Tolerances,
    select_subspace_new,
    select_subspace_original,
)
from greedy_colloc.linalg import ls_solve, qr_factor

BLOWUP_THRESHOLD = 1e10

__all__ = [
    "Scheme",
    "HeatProblem",
    "RunResult",
    "assemble_stationary_matrix",
    "assemble_heat_matrix",
    "scheme_rhs_interior",
    "select_for_problem",
    "run",
    "relative_rms_error",
    "BLOWUP_THRESHOLD",
]


class Scheme(Enum):
    CN = "cn"
    SBDF1 = "sbdf1"
    SBDF2 = "sbdf2"


# Interior block is  c0 * Phi - c_dt * dt * D * lap(Phi).
_MATRIX_COEFFS = {Scheme.CN: (2.0, 1.0), Scheme.SBDF1: (1.0, 1.0), Scheme.SBDF2: (3.0, 2.0)}


@dataclass
class HeatProblem:
    """A linear heat problem u_t = D lap u + f with Dirichlet data g.

    ``interior`` holds the PDE collocation points, ``boundary`` the Dirichlet
    collocation points (may be None for problems posed without boundary
    rows), and ``centers`` the trial centers; by default the trial centers
    are the interior points.  ``source``, ``dirichlet``, ``initial`` and
    ``exact`` are vectorized callables of (points[, t]).
    """

    diffusion: float
    source: callable
    dirichlet: callable
    initial: callable
    interior: PointCloud
    kernel: KernelSpec
    dt: float
    t_final: float
    boundary: PointCloud | None = None
    centers: PointCloud | None = None
    exact: callable | None = None

    def __post_init__(self):
        if self.diffusion <= 0:
            raise ValueError("diffusion must be positive")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        steps = self.t_final / self.dt
        if abs(steps - round(steps)) > 1e-12 * max(1.0, steps):
            raise ValueError("dt must divide t_final")
        if self.centers is None:
            self.centers = self.interior

    @property
    def step_count(self) -> int:
        return int(round(self.t_final / self.dt))

    def collocation_points(self) -> PointCloud:
        if self.boundary is None:
            return self.interior
        return self.interior.concat(self.boundary)


def assemble_heat_matrix(kernel, interior, boundary, centers, dt, diffusion, scheme):
    """Stationary collocation matrix: scheme rows on interior points,
    Dirichlet value rows on boundary points.  dt = 0 gives the c0 * Phi limit."""
    c0, cdt = _MATRIX_COEFFS[scheme]
    val = assemble_matrix(kernel, interior, centers, MatrixOp.VALUE)
    lap = assemble_matrix(kernel, interior, centers, MatrixOp.LAPLACIAN)
    blocks = [c0 * val - cdt * dt * diffusion * lap]
    if boundary is not None and boundary.n > 0:
        blocks.append(assemble_matrix(kernel, boundary, centers, MatrixOp.VALUE))
    return np.vstack(blocks)


def assemble_stationary_matrix(problem: HeatProblem, scheme: Scheme):
    """Matrix plus row labels for the problem's collocation layout."""
    a = assemble_heat_matrix(
        problem.kernel,
        problem.interior,
        problem.boundary,
        problem.centers,
        problem.dt,
        problem.diffusion,
        scheme,
    )
    labels = problem.collocation_points().labels
    return a, labels


def scheme_rhs_interior(scheme, dt, diffusion, source_now, source_prev, source_prev2,
                        u_prev, lap_u_prev, u_prev2):
    """Interior right-hand side of one step for the given scheme."""
    if scheme is Scheme.CN:
        return 2.0 * u_prev + dt * (source_now + diffusion * lap_u_prev + source_prev)
    if scheme is Scheme.SBDF1:
        return u_prev + dt * source_prev
    if scheme is Scheme.SBDF2:
        if u_prev2 is None:
            raise ValueError("SBDF2 needs two history levels; take the first step with SBDF1")
        return 4.0 * u_prev - u_prev2 + 2.0 * dt * (2.0 * source_prev - source_prev2)
    raise ValueError(f"unknown scheme {scheme!r}")


@dataclass
class RunResult:
    coefficients: list = field(default_factory=list)  # lam^k per step, k = 0..K
    errors: list = field(default_factory=list)  # relative RMS per step when exact given
    blowup: bool = False
    blowup_step: int | None = None
    selected_cols: list | None = None

    @property
    def final_error(self) -> float:
        return self.errors[-1] if self.errors else float("nan")


def relative_rms_error(pred, exact) -> float:
    """||pred - exact||_2 / ||exact||_2 over a common evaluation set."""
    pred = np.asarray(pred, dtype=float)
    exact = np.asarray(exact, dtype=float)
    if pred.shape != exact.shape:
        raise ValueError("length mismatch")
    denom = np.linalg.norm(exact)
    if denom == 0.0:
        raise ValueError("exact solution vanishes on the evaluation set")
    return float(np.linalg.norm(pred - exact) / denom)


def _blown_up(values) -> bool:
    # Divergence is detected on field values: greedy-selected ill-conditioned
    # bases legitimately carry huge coefficients while representing O(1) fields.
    return not np.all(np.isfinite(values)) or np.max(np.abs(values)) > BLOWUP_THRESHOLD


def _assembled_parts(problem: HeatProblem, centers: PointCloud):
    """Shared value/Laplacian blocks for matrix building and history evaluation."""
    parts = assemble_ops(
        problem.kernel, problem.interior, centers, [MatrixOp.VALUE, MatrixOp.LAPLACIAN]
    )
    val_int, lap_int = parts[MatrixOp.VALUE], parts[MatrixOp.LAPLACIAN]
    val_bdy = None
    if problem.boundary is not None and problem.boundary.n > 0:
        val_bdy = assemble_matrix(problem.kernel, problem.boundary, centers, MatrixOp.VALUE)
    return val_int, lap_int, val_bdy


def _matrix_from_parts(val_int, lap_int, val_bdy, dt, diffusion, scheme):
    c0, cdt = _MATRIX_COEFFS[scheme]
    top = c0 * val_int - cdt * dt * diffusion * lap_int
    return top if val_bdy is None else np.vstack([top, val_bdy])


def _fit_initial(problem, val_int, val_bdy):
    val_all = val_int if val_bdy is None else np.vstack([val_int, val_bdy])
    pts_all = problem.collocation_points().points
    lam = ls_solve(qr_factor(val_all), problem.initial(pts_all))
    return lam, val_all, pts_all


def select_for_problem(problem: HeatProblem, scheme: Scheme,
                       tol: Tolerances, variant: str = "new"):
    """Greedy column selection on the first-step system A lam^1 = b(lam^0).

    Run once; the returned selection indexes the problem's trial centers and
    is reused for the whole march.
    """
    val_int, lap_int, val_bdy = _assembled_parts(problem, problem.centers)
    a = _matrix_from_parts(val_int, lap_int, val_bdy, problem.dt, problem.diffusion, scheme)
    lam0, _, _ = _fit_initial(problem, val_int, val_bdy)
    pts_int = problem.interior.points
    dt = problem.dt
    rhs_int = scheme_rhs_interior(
        scheme, dt, problem.diffusion,
        source_now=problem.source(pts_int, dt),
        source_prev=problem.source(pts_int, 0.0),
        source_prev2=problem.source(pts_int, 0.0),
        u_prev=val_int @ lam0,
        lap_u_prev=lap_int @ lam0,
        u_prev2=val_int @ lam0,
    )
    if problem.boundary is not None:
        rhs = np.concatenate([rhs_int, problem.dirichlet(problem.boundary.points, dt)])
    else:
        rhs = rhs_int
    select = select_subspace_new if variant == "new" else select_subspace_original
    return select(a, rhs, tol)


def run(problem: HeatProblem, scheme: Scheme, selection=None,
        store_trajectory: bool = True) -> RunResult:
    """March the problem to t_final on the (optionally greedy-reduced) trial space.

    The stationary matrix is factored once over all rows and the selected
    columns; every step is one least-squares solve.  Coefficients whose
    infinity norm passes ``BLOWUP_THRESHOLD`` abort the run with the blow-up
    flag set (an expected outcome for unstable configurations, not an error).
    """
    cols = list(selection.cols) if selection is not None else None
    centers = problem.centers if cols is None else problem.centers.subset(cols)

    val_int, lap_int, val_bdy = _assembled_parts(problem, centers)
    a = _matrix_from_parts(val_int, lap_int, val_bdy, problem.dt, problem.diffusion, scheme)
    factor = qr_factor(a)
    if scheme is Scheme.SBDF2:
        a1 = _matrix_from_parts(
            val_int, lap_int, val_bdy, problem.dt, problem.diffusion, Scheme.SBDF1
        )
        factor_first = qr_factor(a1)

    result = RunResult(selected_cols=cols)
    pts_int = problem.interior.points
    dt, diffusion = problem.dt, problem.diffusion

    lam, val_all, pts_all = _fit_initial(problem, val_int, val_bdy)
    lam_prev2 = None
    if store_trajectory:
        result.coefficients.append(lam.copy())
    values = val_all @ lam
    if problem.exact is not None:
        result.errors.append(relative_rms_error(values, problem.exact(pts_all, 0.0)))
    if _blown_up(values):
        result.blowup, result.blowup_step = True, 0
        return result

    for k in range(1, problem.step_count + 1):
        t_now = k * dt
        t_prev = t_now - dt
        step_scheme = scheme
        step_factor = factor
        if scheme is Scheme.SBDF2 and k == 1:
            step_scheme, step_factor = Scheme.SBDF1, factor_first
        rhs_int = scheme_rhs_interior(
            step_scheme, dt, diffusion,
            source_now=problem.source(pts_int, t_now),
            source_prev=problem.source(pts_int, t_prev),
            source_prev2=problem.source(pts_int, t_prev - dt) if k >= 2 else None,
            u_prev=val_int @ lam,
            lap_u_prev=lap_int @ lam,
            u_prev2=val_int @ lam_prev2 if lam_prev2 is not None else None,
        )
        if problem.boundary is not None:
            rhs = np.concatenate([rhs_int, problem.dirichlet(problem.boundary.points, t_now)])
        else:
            rhs = rhs_int
        lam_prev2 = lam
        lam = ls_solve(step_factor, rhs)
        if store_trajectory:
            result.coefficients.append(lam.copy())
        values = val_all @ lam
        if _blown_up(values):
            result.blowup, result.blowup_step = True, k
            if problem.exact is not None:
                result.errors.append(float("inf"))
            return result
        if problem.exact is not None:
            result.errors.append(relative_rms_error(values, problem.exact(pts_all, t_now)))
    return result
