"""Halton point clouds in bulk domains and on implicitly defined surfaces.

Bulk domains are filled with the Halton sequence of the domain's bounding
box, rejecting points outside; this keeps the prefix property of the
sequence (the first k accepted points of a domain are a prefix of the
first k+1).  Surface clouds are generated through each surface's standard
parameterization and carry unit normals and mean curvature (sum of
principal curvatures, outward-positive) computed analytically from the
implicit description F = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.spatial import cKDTree

__all__ = [
    "PointLabel",
    "PointCloud",
    "halton",
    "Circle",
    "Sphere",
    "Torus",
    "Ellipsoid",
    "DupinCyclide",
    "SquareBoundary",
    "UnitSquare",
    "UnitDisk",
    "TorusInterior",
    "EllipsoidInterior",
    "CyclideInterior",
    "fill_bulk",
    "fill_surface",
    "implicit_surface_data",
]

_PRIMES = (2, 3, 5, 7, 11, 13)


class PointLabel(Enum):
    INTERIOR = "interior"
    SURFACE = "surface"


@dataclass
class PointCloud:
    """An ordered point set with optional per-point surface data.

    ``normals`` and ``mean_curvatures``, when present, have one entry per
    point; rows of NaN mark points without surface data (e.g. after
    concatenating an interior cloud with a surface cloud).
    """

    points: np.ndarray
    labels: np.ndarray
    normals: np.ndarray | None = None
    mean_curvatures: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.labels = np.asarray(self.labels, dtype=object)
        if self.labels.shape[0] != self.points.shape[0]:
            raise ValueError("labels and points must have the same length")
        if self.normals is not None:
            self.normals = np.asarray(self.normals, dtype=float)
            if self.normals.shape != self.points.shape:
                raise ValueError("normals must match points in shape")
            finite = np.all(np.isfinite(self.normals), axis=1)
            norms = np.linalg.norm(self.normals[finite], axis=1)
            if norms.size and np.any(np.abs(norms - 1.0) > 1e-10):
                raise ValueError("normals must have unit norm")
        if self.mean_curvatures is not None:
            self.mean_curvatures = np.asarray(self.mean_curvatures, dtype=float)
            if self.mean_curvatures.shape[0] != self.points.shape[0]:
                raise ValueError("mean_curvatures must match points in length")
        if self.points.shape[0] > 1:
            tree = cKDTree(self.points)
            dist, _ = tree.query(self.points, k=2)
            if np.any(dist[:, 1] == 0.0):
                raise ValueError("point cloud contains duplicate points")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def concat(self, other: "PointCloud") -> "PointCloud":
        """Concatenate two clouds, padding missing surface data with NaN."""
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        pts = np.vstack([self.points, other.points])
        labels = np.concatenate([self.labels, other.labels])
        normals = None
        if self.normals is not None or other.normals is not None:
            a = self.normals if self.normals is not None else np.full_like(self.points, np.nan)
            b = other.normals if other.normals is not None else np.full_like(other.points, np.nan)
            normals = np.vstack([a, b])
        curv = None
        if self.mean_curvatures is not None or other.mean_curvatures is not None:
            a = (
                self.mean_curvatures
                if self.mean_curvatures is not None
                else np.full(self.n, np.nan)
            )
            b = (
                other.mean_curvatures
                if other.mean_curvatures is not None
                else np.full(other.n, np.nan)
            )
            curv = np.concatenate([a, b])
        return PointCloud(pts, labels, normals, curv)

    def subset(self, idx) -> "PointCloud":
        idx = np.asarray(idx)
        return PointCloud(
            self.points[idx],
            self.labels[idx],
            None if self.normals is None else self.normals[idx],
            None if self.mean_curvatures is None else self.mean_curvatures[idx],
        )

    def to_csv(self, path) -> None:
        cols = ["x", "y"] + (["z"] if self.dim == 3 else []) + ["label"]
        if self.normals is not None:
            cols += ["nx", "ny"] + (["nz"] if self.dim == 3 else [])
        if self.mean_curvatures is not None:
            cols += ["H"]
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for i in range(self.n):
                row = [repr(float(v)) for v in self.points[i]]
                row.append(self.labels[i].value)
                if self.normals is not None:
                    row += [repr(float(v)) for v in self.normals[i]]
                if self.mean_curvatures is not None:
                    row.append(repr(float(self.mean_curvatures[i])))
                fh.write(",".join(row) + "\n")

    @staticmethod
    def from_csv(path) -> "PointCloud":
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            rows = [line.strip().split(",") for line in fh if line.strip()]
        dim = 3 if "z" in header else 2
        pts = np.array([[float(v) for v in r[:dim]] for r in rows])
        li = header.index("label")
        labels = np.array([PointLabel(r[li]) for r in rows], dtype=object)
        normals = None
        if "nx" in header:
            ni = header.index("nx")
            normals = np.array([[float(v) for v in r[ni : ni + dim]] for r in rows])
        curv = None
        if "H" in header:
            hi = header.index("H")
            curv = np.array([float(r[hi]) for r in rows])
        return PointCloud(pts, labels, normals, curv)


def _radical_inverse(base: int, index: int) -> float:
    f = 1.0
    out = 0.0
    while index > 0:
        f /= base
        out += f * (index % base)
        index //= base
    return out


def halton(index: int, dim: int) -> np.ndarray:
    """The ``index``-th point (1-based) of the Halton sequence in [0,1)^dim."""
    if not 1 <= dim <= len(_PRIMES):
        raise ValueError(f"dim must be in [1, {len(_PRIMES)}]")
    if index < 1:
        raise ValueError("index must be positive")
    return np.array([_radical_inverse(_PRIMES[k], index) for k in range(dim)])


# ---------------------------------------------------------------------------
# Surfaces (implicit F = 0 with analytic gradient and Hessian).
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Circle:
    radius: float = 1.0
    dim: int = field(default=2, init=False)

    def implicit(self, x):
        return x[0] ** 2 + x[1] ** 2 - self.radius**2

    def implicit_gradient(self, x):
        return 2.0 * np.asarray(x, dtype=float)

    def implicit_hessian(self, x):
        return 2.0 * np.eye(2)

    def parametric_points(self, count):
        theta = 2.0 * np.pi * np.arange(count) / count
        return self.radius * np.column_stack([np.cos(theta), np.sin(theta)])


@dataclass(frozen=True)
class Sphere:
    radius: float = 1.0
    dim: int = field(default=3, init=False)

    def implicit(self, x):
        return float(np.dot(x, x)) - self.radius**2

    def implicit_gradient(self, x):
        return 2.0 * np.asarray(x, dtype=float)

    def implicit_hessian(self, x):
        return 2.0 * np.eye(3)

    def parametric_points(self, count):
        uv = _halton_block(count, 2)
        theta = 2.0 * np.pi * uv[:, 0]
        z = 2.0 * uv[:, 1] - 1.0
        rho = np.sqrt(np.maximum(0.0, 1.0 - z**2))
        return self.radius * np.column_stack([rho * np.cos(theta), rho * np.sin(theta), z])


@dataclass(frozen=True)
class Torus:
    ring_radius: float = 1.0
    tube_radius: float = 0.5
    dim: int = field(default=3, init=False)

    def __post_init__(self):
        if not 0 < self.tube_radius < self.ring_radius:
            raise ValueError("torus requires 0 < tube_radius < ring_radius")

    def implicit(self, x):
        rho = np.hypot(x[0], x[1])
        return (rho - self.ring_radius) ** 2 + x[2] ** 2 - self.tube_radius**2

    def implicit_gradient(self, x):
        rho = np.hypot(x[0], x[1])
        w = 2.0 * (rho - self.ring_radius) / rho
        return np.array([w * x[0], w * x[1], 2.0 * x[2]])

    def implicit_hessian(self, x):
        rho = np.hypot(x[0], x[1])
        rr = self.ring_radius
        h = np.zeros((3, 3))
        h[0, 0] = 2.0 * (x[0] ** 2 / rho**2 + (rho - rr) * x[1] ** 2 / rho**3)
        h[1, 1] = 2.0 * (x[1] ** 2 / rho**2 + (rho - rr) * x[0] ** 2 / rho**3)
        h[0, 1] = h[1, 0] = 2.0 * x[0] * x[1] * (1.0 / rho**2 - (rho - rr) / rho**3)
        h[2, 2] = 2.0
        return h

    def parametric_points(self, count):
        uv = _halton_block(count, 2)
        theta = 2.0 * np.pi * uv[:, 0]
        phi = 2.0 * np.pi * uv[:, 1]
        w = self.ring_radius + self.tube_radius * np.cos(phi)
        return np.column_stack(
            [w * np.cos(theta), w * np.sin(theta), self.tube_radius * np.sin(phi)]
        )


@dataclass(frozen=True)
class Ellipsoid:
    a: float = 1.0
    b: float = 0.8
    c: float = 0.6
    dim: int = field(default=3, init=False)

    def implicit(self, x):
        return (x[0] / self.a) ** 2 + (x[1] / self.b) ** 2 + (x[2] / self.c) ** 2 - 1.0

    def implicit_gradient(self, x):
        return 2.0 * np.array([x[0] / self.a**2, x[1] / self.b**2, x[2] / self.c**2])

    def implicit_hessian(self, x):
        return 2.0 * np.diag([1.0 / self.a**2, 1.0 / self.b**2, 1.0 / self.c**2])

    def parametric_points(self, count):
        sphere = Sphere(1.0).parametric_points(count)
        return sphere * np.array([self.a, self.b, self.c])


@dataclass(frozen=True)
class DupinCyclide:
    """Ring cyclide (x^2+y^2+z^2+b^2-d^2)^2 = 4(ax-cd)^2 + 4b^2y^2, b^2 = a^2-c^2."""

    a: float = 2.0
    c: float = 0.5
    d: float = 1.0
    dim: int = field(default=3, init=False)

    def __post_init__(self):
        if not (0 <= self.c < self.d < self.a):
            raise ValueError("ring cyclide requires 0 <= c < d < a")

    @property
    def b(self) -> float:
        return np.sqrt(self.a**2 - self.c**2)

    def implicit(self, x):
        q = float(np.dot(x, x))
        g = q + self.b**2 - self.d**2
        return g**2 - 4.0 * (self.a * x[0] - self.c * self.d) ** 2 - 4.0 * self.b**2 * x[1] ** 2

    def implicit_gradient(self, x):
        x = np.asarray(x, dtype=float)
        g = float(np.dot(x, x)) + self.b**2 - self.d**2
        grad = 4.0 * g * x
        grad[0] -= 8.0 * self.a * (self.a * x[0] - self.c * self.d)
        grad[1] -= 8.0 * self.b**2 * x[1]
        return grad

    def implicit_hessian(self, x):
        x = np.asarray(x, dtype=float)
        g = float(np.dot(x, x)) + self.b**2 - self.d**2
        h = 4.0 * g * np.eye(3) + 8.0 * np.outer(x, x)
        h[0, 0] -= 8.0 * self.a**2
        h[1, 1] -= 8.0 * self.b**2
        return h

    def parametric_points(self, count):
        uv = _halton_block(count, 2)
        u = 2.0 * np.pi * uv[:, 0]
        v = 2.0 * np.pi * uv[:, 1]
        a, b, c, d = self.a, self.b, self.c, self.d
        denom = a - c * np.cos(u) * np.cos(v)
        x = (d * (c - a * np.cos(u) * np.cos(v)) + b**2 * np.cos(u)) / denom
        y = b * np.sin(u) * (a - d * np.cos(v)) / denom
        z = b * np.sin(v) * (c * np.cos(u) - d) / denom
        return np.column_stack([x, y, z])


@dataclass(frozen=True)
class SquareBoundary:
    """The boundary of the unit square, sampled uniformly along the perimeter."""

    dim: int = field(default=2, init=False)

    def parametric_points(self, count):
        t = 4.0 * np.arange(count) / count
        pts = np.empty((count, 2))
        for i, ti in enumerate(t):
            side, s = int(ti), ti - int(ti)
            if side == 0:
                pts[i] = (s, 0.0)
            elif side == 1:
                pts[i] = (1.0, s)
            elif side == 2:
                pts[i] = (1.0 - s, 1.0)
            else:
                pts[i] = (0.0, 1.0 - s)
        return pts


def _halton_block(count: int, dim: int, start: int = 1) -> np.ndarray:
    return np.array([halton(i, dim) for i in range(start, start + count)])


def implicit_surface_data(geom, x):
    """Unit outward normal and mean curvature from the implicit description.

    The mean curvature is the divergence of the unit normal field,
        H = (lap F * |grad F|^2 - grad F . Hess F . grad F) / |grad F|^3,
    positive for a sphere with outward normal.
    """
    x = np.asarray(x, dtype=float)
    if abs(geom.implicit(x)) > 1e-8:
        raise ValueError("point does not lie on the surface")
    grad = geom.implicit_gradient(x)
    norm = np.linalg.norm(grad)
    if norm < 1e-12:
        raise ValueError("normal undefined: implicit gradient vanishes")
    hess = geom.implicit_hessian(x)
    curv = (np.trace(hess) * norm**2 - grad @ hess @ grad) / norm**3
    return grad / norm, float(curv)


# ---------------------------------------------------------------------------
# Bulk domains (bounding box + membership test).
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UnitSquare:
    dim: int = field(default=2, init=False)

    def bounding_box(self):
        return np.zeros(2), np.ones(2)

    def contains(self, p):
        return np.ones(p.shape[0], dtype=bool)


@dataclass(frozen=True)
class UnitCube:
    dim: int = field(default=3, init=False)

    def bounding_box(self):
        return np.zeros(3), np.ones(3)

    def contains(self, p):
        return np.ones(p.shape[0], dtype=bool)


@dataclass(frozen=True)
class UnitDisk:
    dim: int = field(default=2, init=False)

    def bounding_box(self):
        return -np.ones(2), np.ones(2)

    def contains(self, p):
        return np.einsum("ij,ij->i", p, p) < 1.0


@dataclass(frozen=True)
class TorusInterior:
    ring_radius: float = 1.0
    tube_radius: float = 0.5
    dim: int = field(default=3, init=False)

    def __post_init__(self):
        if not 0 < self.tube_radius < self.ring_radius:
            raise ValueError("torus requires 0 < tube_radius < ring_radius")

    def bounding_box(self):
        out = self.ring_radius + self.tube_radius
        return (
            np.array([-out, -out, -self.tube_radius]),
            np.array([out, out, self.tube_radius]),
        )

    def contains(self, p):
        rho = np.hypot(p[:, 0], p[:, 1])
        return (rho - self.ring_radius) ** 2 + p[:, 2] ** 2 < self.tube_radius**2


@dataclass(frozen=True)
class EllipsoidInterior:
    a: float = 1.0
    b: float = 0.8
    c: float = 0.6
    dim: int = field(default=3, init=False)

    def bounding_box(self):
        half = np.array([self.a, self.b, self.c])
        return -half, half

    def contains(self, p):
        return (
            (p[:, 0] / self.a) ** 2 + (p[:, 1] / self.b) ** 2 + (p[:, 2] / self.c) ** 2
        ) < 1.0


@dataclass(frozen=True)
class CyclideInterior:
    a: float = 2.0
    c: float = 0.5
    d: float = 1.0
    dim: int = field(default=3, init=False)

    def __post_init__(self):
        if not (0 <= self.c < self.d < self.a):
            raise ValueError("ring cyclide requires 0 <= c < d < a")

    def _surface(self):
        return DupinCyclide(self.a, self.c, self.d)

    def bounding_box(self):
        pts = self._surface().parametric_points(4096)
        return pts.min(axis=0), pts.max(axis=0)

    def contains(self, p):
        surf = self._surface()
        return np.array([surf.implicit(q) < 0.0 for q in p])


def fill_bulk(domain, count: int) -> PointCloud:
    """First ``count`` Halton points of the domain's bounding box that fall
    strictly inside the domain, labelled interior.  Deterministic; the output
    for ``count`` is a prefix of the output for ``count + 1``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    lo, hi = domain.bounding_box()
    span = hi - lo
    accepted = []
    index = 1
    block = max(64, 2 * count)
    while len(accepted) < count:
        unit = _halton_block(block, domain.dim, start=index)
        index += block
        pts = lo + unit * span
        keep = domain.contains(pts)
        accepted.extend(pts[keep])
    pts = np.array(accepted[:count])
    labels = np.array([PointLabel.INTERIOR] * count, dtype=object)
    return PointCloud(pts, labels)


def fill_surface(geom, count: int) -> PointCloud:
    """``count`` points on the surface with unit normals and mean curvature.

    SquareBoundary points carry no normals or curvature (sides are flat and
    the corner normal is undefined); all other surfaces get analytic data
    from their implicit description.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    pts = geom.parametric_points(count)
    labels = np.array([PointLabel.SURFACE] * count, dtype=object)
    if isinstance(geom, SquareBoundary):
        return PointCloud(pts, labels)
    normals = np.empty_like(pts)
    curv = np.empty(count)
    for i, p in enumerate(pts):
        normals[i], curv[i] = implicit_surface_data(geom, p)
    return PointCloud(pts, labels, normals, curv)
