"""Meshfree kernel collocation with greedy trial-subspace selection.

The package couples radial-kernel collocation in space with Crank-Nicolson
and semi-implicit BDF time stepping, and selects a stable trial subspace
(a column subset of the collocation matrix) with a block-greedy algorithm
whose stopping tolerances are matched to the time step.
"""

from greedy_colloc.kernels import KernelSpec, kernel_eval, assemble_matrix
from greedy_colloc.geometry import PointCloud, halton, fill_bulk, fill_surface
from greedy_colloc.linalg import QrFactor, qr_factor
from greedy_colloc.greedy import (
    Tolerances,
    tolerances_from_dt,
    GreedyColumnSelector,
    select_subspace_original,
    select_subspace_new,
)

__all__ = [
    "KernelSpec",
    "kernel_eval",
    "assemble_matrix",
    "PointCloud",
    "halton",
    "fill_bulk",
    "fill_surface",
    "QrFactor",
    "qr_factor",
    "Tolerances",
    "tolerances_from_dt",
    "GreedyColumnSelector",
    "select_subspace_original",
    "select_subspace_new",
]

__version__ = "0.1.0"
