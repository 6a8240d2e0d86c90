"""Coupled bulk-surface reaction-diffusion dynamics (Turing pattern formation).

Two species diffuse and react in a bulk domain (fields u, v) and on its
boundary surface (fields w, s), linked by flux boundary conditions:

    u_t = D_u lap u + f1(u, v),   v_t = D_v lap v + f2(u, v)       in the bulk
    w_t = D_w lap_S w + f1(w, s) - h1(u, w)                        on the surface
    s_t = D_s lap_S s + f2(w, s) - h2(v, s)
    D_u du/dn = h1(u, w),   D_v dv/dn = h2(v, s)                   on the surface

with kinetics f1 = gamma (a - u + u^2 v), f2 = gamma (b - u^2 v) and
couplings h1 = alpha1 w - beta1 u, h2 = alpha2 s - beta2 v, where the bulk
fields entering h1, h2 are their traces on the surface.  Time stepping is
SBDF2 with explicit reaction and coupling terms; the first step from the
homogeneous equilibrium is the identity analytically, so the four
collocation systems are only ever solved from step two on, where round-off
in the reduced least-squares solves supplies the symmetry-breaking
perturbation.  No artificial noise is injected.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from greedy_colloc.geometry import PointCloud, PointLabel, fill_bulk, fill_surface
from greedy_colloc.kernels import KernelSpec, MatrixOp, assemble_matrix, assemble_ops
from greedy_colloc.linalg import ls_solve, qr_factor
from greedy_colloc.greedy import GreedySelection, Tolerances, select_subspace_new
from greedy_colloc.timestep import BLOWUP_THRESHOLD

__all__ = [
    "BulkSurfaceParams",
    "BulkSurfaceGeometry",
    "SimulationResult",
    "kinetics",
    "coupling_h1",
    "coupling_h2",
    "equilibrium",
    "validate_smoothness",
    "assemble_bulk_operator",
    "assemble_surface_operator",
    "step_rhs_bulk",
    "step_rhs_surface",
    "simulate",
    "count_spots",
]


@dataclass(frozen=True)
class BulkSurfaceParams:
    """Reaction, coupling and diffusion parameters; D_u = q D_v, D_w = q D_s."""

    a: float
    b: float
    alpha1: float
    alpha2: float
    beta1: float
    beta2: float
    gamma: float
    q: float
    D_v: float
    D_s: float

    def __post_init__(self):
        if self.a + self.b <= 0:
            raise ValueError("need a + b > 0 for a well-defined equilibrium")
        if min(self.D_v, self.D_s, self.q) <= 0:
            raise ValueError("diffusion coefficients must be positive")

    @property
    def D_u(self) -> float:
        return self.q * self.D_v

    @property
    def D_w(self) -> float:
        return self.q * self.D_s


def kinetics(u, v, params: BulkSurfaceParams):
    """Reaction terms (f1, f2), vectorized over point values."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    uuv = u * u * v
    return params.gamma * (params.a - u + uuv), params.gamma * (params.b - uuv)


def coupling_h1(u, w, params: BulkSurfaceParams):
    return params.alpha1 * np.asarray(w, dtype=float) - params.beta1 * np.asarray(u, dtype=float)


def coupling_h2(v, s, params: BulkSurfaceParams):
    return params.alpha2 * np.asarray(s, dtype=float) - params.beta2 * np.asarray(v, dtype=float)


def equilibrium(params: BulkSurfaceParams):
    """Homogeneous equilibrium (u0, v0, w0, s0) = (a+b, b/(a+b)^2, a+b, b/(a+b)^2)."""
    ab = params.a + params.b
    return ab, params.b / ab**2, ab, params.b / ab**2


def validate_smoothness(mu_bulk: float, mu_surf: float, dim: int):
    """Check the kernel smoothness-order balance conditions.

    Returns (ok, which) where which is "SO-1", "SO-2", or None.
    """
    if mu_surf >= mu_bulk + dim / 2 - 2 and mu_bulk >= (9 + dim) / 2:
        return True, "SO-1"
    if mu_bulk >= mu_surf - dim / 2 and mu_surf >= 3 + dim:
        return True, "SO-2"
    return False, None


def assemble_bulk_operator(dt, diffusion, kernel: KernelSpec,
                           interior: PointCloud, boundary: PointCloud,
                           centers: PointCloud) -> np.ndarray:
    """SBDF2 bulk operator: 3 Phi - 2 dt D lap Phi rows on interior points,
    flux rows D (grad Phi . n) on boundary points."""
    val = assemble_matrix(kernel, interior, centers, MatrixOp.VALUE)
    lap = assemble_matrix(kernel, interior, centers, MatrixOp.LAPLACIAN)
    top = 3.0 * val - 2.0 * dt * diffusion * lap
    flux = diffusion * assemble_matrix(kernel, boundary, centers, MatrixOp.NORMAL_DERIVATIVE)
    return np.vstack([top, flux])


def assemble_surface_operator(dt, diffusion, kernel: KernelSpec,
                              surface: PointCloud, centers: PointCloud) -> np.ndarray:
    """SBDF2 surface operator: 3 Phi - 2 dt D lap_S Phi on surface points."""
    val = assemble_matrix(kernel, surface, centers, MatrixOp.VALUE)
    lap_s = assemble_matrix(kernel, surface, centers, MatrixOp.SURFACE_LAPLACIAN)
    return 3.0 * val - 2.0 * dt * diffusion * lap_s


def step_rhs_bulk(prev_interior, prev2_interior, react_prev, react_prev2,
                  coupling_prev_boundary, dt):
    """One-step right-hand side of a bulk field.

    Interior rows get the 3/-4/1 time stencil with the reaction term
    extrapolated as 2 * previous - older; flux rows get the coupling value
    at the previous step.
    """
    interior = (
        4.0 * prev_interior - prev2_interior
        + 2.0 * dt * (2.0 * react_prev - react_prev2)
    )
    return np.concatenate([interior, coupling_prev_boundary])


def step_rhs_surface(prev, prev2, react_prev, react_prev2, dt):
    """One-step right-hand side of a surface field; ``react`` already
    includes the coupling sink (kinetics minus coupling)."""
    return 4.0 * prev - prev2 + 2.0 * dt * (2.0 * react_prev - react_prev2)


@dataclass
class BulkSurfaceGeometry:
    """Collocation layout: the bulk cloud is interior points plus the surface
    points (shared), so each collocation system is exactly determined."""

    bulk: PointCloud
    surface: PointCloud
    interior_count: int

    @staticmethod
    def build(domain, surface_geom, n_bulk: int, n_surf: int) -> "BulkSurfaceGeometry":
        if n_bulk <= n_surf:
            raise ValueError("need more bulk points than surface points")
        interior = fill_bulk(domain, n_bulk - n_surf)
        surface = fill_surface(surface_geom, n_surf)
        return BulkSurfaceGeometry(
            bulk=interior.concat(surface), surface=surface, interior_count=n_bulk - n_surf
        )

    @property
    def interior(self) -> PointCloud:
        return self.bulk.subset(np.arange(self.interior_count))

    @property
    def boundary_slice(self) -> slice:
        return slice(self.interior_count, self.bulk.n)


@dataclass
class SimulationResult:
    geometry: BulkSurfaceGeometry
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    s: np.ndarray
    snapshots: list = field(default_factory=list)  # (t, {"u":..., "v":..., "w":..., "s":...})
    blowup: bool = False
    blowup_step: int | None = None
    selections: dict = field(default_factory=dict)
    steps_run: int = 0


def _blown_up(*arrays) -> bool:
    for arr in arrays:
        if not np.all(np.isfinite(arr)) or np.max(np.abs(arr)) > BLOWUP_THRESHOLD:
            return True
    return False


def simulate(params: BulkSurfaceParams, geometry: BulkSurfaceGeometry,
             kernel_bulk: KernelSpec, kernel_surf: KernelSpec,
             dt: float, t_final: float, use_greedy: bool,
             tol: Tolerances | None = None, snapshot_times=None,
             _freeze_surface: bool = False) -> SimulationResult:
    """March the four-field system to t_final with SBDF2.

    When ``use_greedy`` is set, the column subspace of each of the four
    stationary operators is selected once (second step, constant right-hand
    side, so an all-ones vector stands in for it) and reused for the whole
    run.  All four systems are factored once.
    """
    # Gaussian kernels are infinitely smooth; they enter the order balance as
    # mu = infinity.
    mu_bulk = np.inf if kernel_bulk.mu is None else kernel_bulk.mu
    mu_surf_order = np.inf if kernel_surf.mu is None else kernel_surf.mu - 0.5
    ok, _ = validate_smoothness(mu_bulk, mu_surf_order, kernel_bulk.dim)
    if not ok:
        raise ValueError(
            f"kernel smoothness orders ({mu_bulk}, {mu_surf_order}) violate "
            "both balance conditions"
        )
    if geometry.surface.normals is None or geometry.surface.mean_curvatures is None:
        raise ValueError("surface cloud must carry normals and curvature")

    interior = geometry.interior
    boundary = geometry.surface
    bulk_centers = geometry.bulk
    surf_centers = geometry.surface
    bsl = geometry.boundary_slice
    n_int = geometry.interior_count

    # Shared assembly: one radial sweep per (rows, centers) pair.
    bulk_parts = assemble_ops(
        kernel_bulk, interior, bulk_centers, [MatrixOp.VALUE, MatrixOp.LAPLACIAN]
    )
    bdy_parts = assemble_ops(
        kernel_bulk, boundary, bulk_centers, [MatrixOp.VALUE, MatrixOp.NORMAL_DERIVATIVE]
    )
    surf_parts = assemble_ops(
        kernel_surf, boundary, surf_centers, [MatrixOp.VALUE, MatrixOp.SURFACE_LAPLACIAN]
    )

    def _bulk_op(diffusion):
        top = (
            3.0 * bulk_parts[MatrixOp.VALUE]
            - 2.0 * dt * diffusion * bulk_parts[MatrixOp.LAPLACIAN]
        )
        return np.vstack([top, diffusion * bdy_parts[MatrixOp.NORMAL_DERIVATIVE]])

    def _surf_op(diffusion):
        return (
            3.0 * surf_parts[MatrixOp.VALUE]
            - 2.0 * dt * diffusion * surf_parts[MatrixOp.SURFACE_LAPLACIAN]
        )

    a_u, a_v = _bulk_op(params.D_u), _bulk_op(params.D_v)
    a_w, a_s = _surf_op(params.D_w), _surf_op(params.D_s)

    result = SimulationResult(
        geometry=geometry, u=None, v=None, w=None, s=None
    )

    u0, v0, w0, s0 = equilibrium(params)
    if use_greedy:
        if tol is None:
            raise ValueError("greedy selection needs tolerances")
        # The second-step right-hand sides are known constants: 3 * field
        # value on PDE rows, vanishing coupling on flux rows.
        rhs_bulk = lambda c: np.concatenate([3.0 * c * np.ones(n_int), np.zeros(boundary.n)])
        rhs_surf = lambda c: 3.0 * c * np.ones(boundary.n)
        sels = {
            "u": select_subspace_new(a_u, rhs_bulk(u0), tol),
            "v": select_subspace_new(a_v, rhs_bulk(v0), tol),
            "w": select_subspace_new(a_w, rhs_surf(w0), tol),
            "s": select_subspace_new(a_s, rhs_surf(s0), tol),
        }
        result.selections = sels
        cols = {name: sel.cols for name, sel in sels.items()}
    else:
        cols = {"u": None, "v": None, "w": None, "s": None}

    def _reduce(mat, c):
        return mat if c is None else mat[:, c]

    factors = {
        "u": qr_factor(_reduce(a_u, cols["u"])),
        "v": qr_factor(_reduce(a_v, cols["v"])),
        "w": qr_factor(_reduce(a_w, cols["w"])),
        "s": qr_factor(_reduce(a_s, cols["s"])),
    }

    val_bulk_full = np.vstack([bulk_parts[MatrixOp.VALUE], bdy_parts[MatrixOp.VALUE]])
    val_u = _reduce(val_bulk_full, cols["u"])
    val_v = _reduce(val_bulk_full, cols["v"])
    val_w = _reduce(surf_parts[MatrixOp.VALUE], cols["w"])
    val_s = _reduce(surf_parts[MatrixOp.VALUE], cols["s"])
    nb, ns = geometry.bulk.n, boundary.n
    # Steps 0 and 1 are the equilibrium constants (SBDF1 leaves them unchanged).
    u_h = [np.full(nb, u0), np.full(nb, u0)]
    v_h = [np.full(nb, v0), np.full(nb, v0)]
    w_h = [np.full(ns, w0), np.full(ns, w0)]
    s_h = [np.full(ns, s0), np.full(ns, s0)]

    steps = int(round(t_final / dt))
    if abs(steps * dt - t_final) > 1e-12 * max(1.0, t_final):
        raise ValueError("dt must divide t_final")
    snap_steps = {}
    if snapshot_times is not None:
        for t_req in snapshot_times:
            snap_steps[int(round(t_req / dt))] = t_req

    int_sl = slice(0, geometry.interior_count)

    for k in range(2, steps + 1):
        u1, u2 = u_h[-1], u_h[-2]
        v1, v2 = v_h[-1], v_h[-2]
        w1, w2 = w_h[-1], w_h[-2]
        s1, s2 = s_h[-1], s_h[-2]

        f1_1, f2_1 = kinetics(u1[int_sl], v1[int_sl], params)
        f1_2, f2_2 = kinetics(u2[int_sl], v2[int_sl], params)
        rhs_u = step_rhs_bulk(u1[int_sl], u2[int_sl], f1_1, f1_2,
                              coupling_h1(u1[bsl], w1, params), dt)
        rhs_v = step_rhs_bulk(v1[int_sl], v2[int_sl], f2_1, f2_2,
                              coupling_h2(v1[bsl], s1, params), dt)
        g1_1, g2_1 = kinetics(w1, s1, params)
        g1_2, g2_2 = kinetics(w2, s2, params)
        rhs_w = step_rhs_surface(
            w1, w2,
            g1_1 - coupling_h1(u1[bsl], w1, params),
            g1_2 - coupling_h1(u2[bsl], w2, params), dt,
        )
        rhs_s = step_rhs_surface(
            s1, s2,
            g2_1 - coupling_h2(v1[bsl], s1, params),
            g2_2 - coupling_h2(v2[bsl], s2, params), dt,
        )

        lam_u = ls_solve(factors["u"], rhs_u)
        lam_v = ls_solve(factors["v"], rhs_v)
        u_new = val_u @ lam_u
        v_new = val_v @ lam_v
        if _freeze_surface:
            w_new, s_new = w1.copy(), s1.copy()
        else:
            lam_w = ls_solve(factors["w"], rhs_w)
            lam_s = ls_solve(factors["s"], rhs_s)
            w_new = val_w @ lam_w
            s_new = val_s @ lam_s

        if _blown_up(u_new, v_new, w_new, s_new):
            result.blowup, result.blowup_step = True, k
            break

        u_h = [u_h[-1], u_new]
        v_h = [v_h[-1], v_new]
        w_h = [w_h[-1], w_new]
        s_h = [s_h[-1], s_new]
        result.steps_run = k
        if k in snap_steps:
            result.snapshots.append(
                (snap_steps[k], {"u": u_new.copy(), "v": v_new.copy(),
                                 "w": w_new.copy(), "s": s_new.copy()})
            )

    result.u, result.v, result.w, result.s = u_h[-1], v_h[-1], w_h[-1], s_h[-1]
    return result


def _nearest_neighbor_spacing(points: np.ndarray) -> float:
    tree = cKDTree(points)
    dist, _ = tree.query(points, k=2)
    return float(np.median(dist[:, 1]))


def count_spots(cloud: PointCloud, values, radius_factor: float = 3.0,
                mode: str = "auto") -> int:
    """Count connected clusters of prominent local maxima of a point field.

    A point counts as a local maximum if it exceeds every neighbor within
    radius rho (``radius_factor`` times the median nearest-neighbor spacing)
    and exceeds mean + 0.5 (max - mean); maxima within rho of each other
    merge into one cluster.  Fields sampled on a closed 2-d boundary curve
    are treated as a periodic trace in the polar angle and their peaks are
    counted instead (``mode="auto"`` detects this from the labels).
    """
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError("field values must be finite")
    if np.ptp(values) == 0.0:
        return 0
    threshold = values.mean() + 0.5 * (values.max() - values.mean())
    if mode == "auto":
        on_curve = cloud.dim == 2 and all(l is PointLabel.SURFACE for l in cloud.labels)
        mode = "trace" if on_curve else "cloud"
    if mode == "trace":
        center = cloud.points.mean(axis=0)
        theta = np.arctan2(cloud.points[:, 1] - center[1], cloud.points[:, 0] - center[0])
        order = np.argsort(theta)
        v = values[order]
        n = v.size
        peaks = 0
        for i in range(n):
            if v[i] > threshold and v[i] > v[(i - 1) % n] and v[i] > v[(i + 1) % n]:
                peaks += 1
        return peaks
    pts = cloud.points
    rho = radius_factor * _nearest_neighbor_spacing(pts)
    tree = cKDTree(pts)
    neighbors = tree.query_ball_point(pts, rho)
    maxima = []
    for i, nbrs in enumerate(neighbors):
        if values[i] <= threshold:
            continue
        others = [j for j in nbrs if j != i]
        if not others or values[i] > values[others].max():
            maxima.append(i)
    if not maxima:
        return 0
    # Merge maxima within rho of each other (connected components).
    max_pts = pts[maxima]
    max_tree = cKDTree(max_pts)
    pairs = max_tree.query_pairs(rho)
    parent = list(range(len(maxima)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in pairs:
        parent[find(i)] = find(j)
    return len({find(i) for i in range(len(maxima))})
