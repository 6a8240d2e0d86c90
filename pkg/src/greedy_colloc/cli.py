"""Command-line harness exposing the solver's benchmark experiments.

Each experiment name carries a full preset (point counts, time step, shape
parameter, reaction parameters); flags and an optional JSON config file
override preset values, with flags taking precedence over the file.  Runs
write an error-profile CSV, greedy iteration logs, a JSON manifest, and
field snapshots into the output directory.  Expected blow-ups are recorded
results, not errors: the process still exits 0.

Usage:
    greedy-colloc run heat2d-ms --dt 0.01 --n 700 --epsilon 3
    greedy-colloc run heat2d-ms --dt-list 0.02,0.01,0.005 --n-list 500,700,1000
    greedy-colloc run bs-spots-2d --t-final 50 --out results/
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from greedy_colloc import bulksurface as bs
from greedy_colloc import geometry as geo
from greedy_colloc import timestep as ts
from greedy_colloc.greedy import default_tolerances, tolerances_from_dt
from greedy_colloc.kernels import KernelFamily, KernelSpec

__all__ = ["EXPERIMENTS", "ConfigError", "resolve_config", "run_experiment", "main"]


class ConfigError(ValueError):
    pass


_TABLE_BASE = {
    "a": 0.1,
    "b": 0.9,
    "alpha1": 5.0 / 12.0,
    "alpha2": 5.0,
    "beta1": 5.0 / 12.0,
    "beta2": 5.0,
}

EXPERIMENTS = {
    "heat2d-gaussian": dict(
        kind="heat", dim=2, family="gaussian", epsilon=1.0, n=300,
        dt=0.01, t_final=2.0, scheme="cn", use_greedy=True, variant="original",
    ),
    "heat2d-ms": dict(
        kind="heat", dim=2, family="ms", mu=6.0, epsilon=3.0, n=700,
        dt=0.01, t_final=0.2, scheme="cn", use_greedy=True, variant="new",
    ),
    "heat3d-ms": dict(
        kind="heat", dim=3, family="ms", mu=6.0, epsilon=3.0, n=5000,
        dt=0.01, t_final=0.2, scheme="cn", use_greedy=True, variant="new",
    ),
    "bs-spots-2d": dict(
        kind="bs", domain="disk", n_bulk=717, n_surf=100, epsilon=6.0,
        dt=0.005, t_final=200.0, use_greedy=True,
        **_TABLE_BASE, gamma=30.0, q=1.0 / 12.0, D_v=2.0, D_s=2.0,
    ),
    "bs-stripes-2d": dict(
        kind="bs", domain="disk", n_bulk=2869, n_surf=200, epsilon=6.0,
        dt=0.001, t_final=200.0, use_greedy=True,
        **_TABLE_BASE, gamma=500.0, q=1.0 / 10.0, D_v=5.0, D_s=5.0,
    ),
    "bs-torus": dict(
        kind="bs", domain="torus", n_bulk=2644, n_surf=1430, epsilon=1.0,
        dt=0.005, t_final=200.0, use_greedy=True,
        **_TABLE_BASE, gamma=40.0, q=1.0 / 12.0, D_v=3.0, D_s=3.0,
    ),
    "bs-cyclide": dict(
        kind="bs", domain="cyclide", n_bulk=6760, n_surf=2956, epsilon=4.0,
        dt=0.01, t_final=200.0, use_greedy=True,
        **_TABLE_BASE, gamma=30.0, q=1.0 / 12.0, D_v=6.0, D_s=6.0,
    ),
    "bs-ellipsoid": dict(
        kind="bs", domain="ellipsoid", n_bulk=3395, n_surf=1164, epsilon=6.0,
        dt=0.01, t_final=200.0, use_greedy=True,
        **_TABLE_BASE, gamma=30.0, q=1.0 / 12.0, D_v=3.0, D_s=3.0,
    ),
}

_BS_DOMAINS = {
    "disk": lambda: (geo.UnitDisk(), geo.Circle(1.0)),
    "torus": lambda: (geo.TorusInterior(1.0, 0.5), geo.Torus(1.0, 0.5)),
    "cyclide": lambda: (geo.CyclideInterior(2.0, 0.5, 1.0), geo.DupinCyclide(2.0, 0.5, 1.0)),
    "ellipsoid": lambda: (geo.EllipsoidInterior(1.0, 0.8, 0.6), geo.Ellipsoid(1.0, 0.8, 0.6)),
}

_TWO_PI2 = 2.0 * np.pi**2


def heat_exact_2d(p, t):
    decay = np.exp(-_TWO_PI2 * t)
    shape = np.sin(2 * np.pi * p[:, 0]) * np.sin(np.pi * p[:, 1])
    return shape * decay + 0.5 * (1.0 - decay)


def heat_source_2d(p, t):
    decay = np.exp(-_TWO_PI2 * t)
    shape = np.sin(2 * np.pi * p[:, 0]) * np.sin(np.pi * p[:, 1])
    return (3.0 * np.pi**2 * shape + np.pi**2) * decay


def heat_exact_3d(p, t):
    decay = np.exp(-_TWO_PI2 * t)
    shape = (np.sin(2 * np.pi * p[:, 0]) * np.sin(np.pi * p[:, 1])
             * np.sin(np.pi * p[:, 2]))
    return shape * decay + 0.5 * (1.0 - decay)


def heat_source_3d(p, t):
    decay = np.exp(-_TWO_PI2 * t)
    shape = (np.sin(2 * np.pi * p[:, 0]) * np.sin(np.pi * p[:, 1])
             * np.sin(np.pi * p[:, 2]))
    return (4.0 * np.pi**2 * shape + np.pi**2) * decay


def cube_boundary(per_edge: int) -> geo.PointCloud:
    """Uniform collocation points on the faces of the unit cube."""
    g = np.linspace(0.0, 1.0, per_edge + 1)
    faces = []
    for axis in range(3):
        for side in (0.0, 1.0):
            a, b = np.meshgrid(g, g, indexing="ij")
            pts = np.zeros((a.size, 3))
            others = [k for k in range(3) if k != axis]
            pts[:, axis] = side
            pts[:, others[0]] = a.ravel()
            pts[:, others[1]] = b.ravel()
            faces.append(pts)
    pts = np.unique(np.round(np.vstack(faces), 12), axis=0)
    labels = np.array([geo.PointLabel.SURFACE] * len(pts), dtype=object)
    return geo.PointCloud(pts, labels)


def build_heat_problem(cfg) -> ts.HeatProblem:
    dim = cfg["dim"]
    n = cfg["n"]
    if dim == 2:
        interior = geo.fill_bulk(geo.UnitSquare(), n)
        ring = cfg.get("boundary_ring") or int(np.ceil(np.sqrt(n)))
        boundary = geo.fill_surface(geo.SquareBoundary(), 4 * ring)
        exact, source = heat_exact_2d, heat_source_2d
    else:
        interior = geo.fill_bulk(geo.UnitCube(), n)
        ring = cfg.get("boundary_ring") or int(np.ceil(n ** (1.0 / 3.0)))
        boundary = cube_boundary(ring)
        exact, source = heat_exact_3d, heat_source_3d
    if cfg["family"] == "gaussian":
        kernel = KernelSpec(KernelFamily.GAUSSIAN, epsilon=cfg["epsilon"], dim=dim)
    else:
        kernel = KernelSpec(
            KernelFamily.MATERN_SOBOLEV, epsilon=cfg["epsilon"], dim=dim, mu=cfg["mu"]
        )
    return ts.HeatProblem(
        diffusion=1.0,
        source=source,
        dirichlet=exact,
        initial=lambda p: exact(p, 0.0),
        interior=interior,
        boundary=boundary,
        kernel=kernel,
        dt=cfg["dt"],
        t_final=cfg["t_final"],
        exact=exact,
    )


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


ERROR_PROFILE_COLUMNS = [
    "dt", "n", "epsilon", "scheme", "greedy", "termination",
    "selected_cols", "final_rel_rms", "blowup",
]


def _write_error_profile(path, rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(ERROR_PROFILE_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[c]) for c in ERROR_PROFILE_COLUMNS) + "\n")


def _write_snapshot(path, points, values) -> None:
    dim = points.shape[1]
    cols = ["x", "y"] + (["z"] if dim == 3 else []) + ["value"]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for p, v in zip(points, values):
            fh.write(",".join([repr(float(c)) for c in p] + [repr(float(v))]) + "\n")


def _run_heat_cell(cfg, outdir: Path, write_snapshots: bool):
    problem = build_heat_problem(cfg)
    scheme = ts.Scheme(cfg["scheme"])
    selection = None
    if cfg["use_greedy"]:
        tol = (default_tolerances() if cfg.get("variant") == "original"
               else tolerances_from_dt(cfg["dt"]))
        selection = ts.select_for_problem(problem, scheme, tol, cfg.get("variant", "new"))
        selection.log_to_csv(outdir / "greedy_log.csv")
    result = ts.run(problem, scheme, selection, store_trajectory=write_snapshots)
    if write_snapshots and result.coefficients:
        cloud = problem.collocation_points()
        centers = (problem.centers if selection is None
                   else problem.centers.subset(selection.cols))
        from greedy_colloc.kernels import MatrixOp, assemble_matrix

        values = assemble_matrix(problem.kernel, cloud, centers, MatrixOp.VALUE) @ result.coefficients[-1]
        _write_snapshot(outdir / "snapshot.csv", cloud.points, values)
    row = {
        "dt": cfg["dt"],
        "n": cfg["n"],
        "epsilon": cfg["epsilon"],
        "scheme": cfg["scheme"],
        "greedy": cfg["use_greedy"],
        "termination": selection.termination.value if selection else "",
        "selected_cols": len(selection.cols) if selection else cfg["n"],
        "final_rel_rms": result.final_error,
        "blowup": result.blowup,
    }
    manifest = {
        "selected_cols": row["selected_cols"],
        "termination": row["termination"],
        "blowup": result.blowup,
        "blowup_step": result.blowup_step,
        "final_rel_rms": None if np.isnan(result.final_error) else result.final_error,
    }
    return row, manifest


def _run_bs_cell(cfg, outdir: Path, write_snapshots: bool):
    params = bs.BulkSurfaceParams(
        a=cfg["a"], b=cfg["b"], alpha1=cfg["alpha1"], alpha2=cfg["alpha2"],
        beta1=cfg["beta1"], beta2=cfg["beta2"], gamma=cfg["gamma"], q=cfg["q"],
        D_v=cfg["D_v"], D_s=cfg["D_s"],
    )
    domain, surface = _BS_DOMAINS[cfg["domain"]]()
    geometry = bs.BulkSurfaceGeometry.build(domain, surface, cfg["n_bulk"], cfg["n_surf"])
    dim = geometry.bulk.dim
    kernel_bulk = KernelSpec(KernelFamily.MATERN_SOBOLEV, epsilon=cfg["epsilon"], dim=dim, mu=6.0)
    kernel_surf = KernelSpec(KernelFamily.MATERN_SOBOLEV, epsilon=cfg["epsilon"], dim=dim, mu=6.0)
    tol = tolerances_from_dt(cfg["dt"]) if cfg["use_greedy"] else None
    result = bs.simulate(
        params, geometry, kernel_bulk, kernel_surf,
        dt=cfg["dt"], t_final=cfg["t_final"], use_greedy=cfg["use_greedy"], tol=tol,
    )
    terminations, counts = [], []
    for name in ("u", "v", "w", "s"):
        if result.selections:
            sel = result.selections[name]
            terminations.append(sel.termination.value)
            counts.append(len(sel.cols))
            sel.log_to_csv(outdir / f"greedy_log_{name}.csv")
        else:
            counts.append(cfg["n_bulk"] if name in ("u", "v") else cfg["n_surf"])
    if write_snapshots:
        _write_snapshot(outdir / "u.csv", geometry.bulk.points, result.u)
        _write_snapshot(outdir / "v.csv", geometry.bulk.points, result.v)
        _write_snapshot(outdir / "w.csv", geometry.surface.points, result.w)
        _write_snapshot(outdir / "s.csv", geometry.surface.points, result.s)
    row = {
        "dt": cfg["dt"],
        "n": cfg["n_bulk"] + cfg["n_surf"],
        "epsilon": cfg["epsilon"],
        "scheme": "sbdf2",
        "greedy": cfg["use_greedy"],
        "termination": ";".join(terminations),
        "selected_cols": ";".join(str(c) for c in counts),
        "final_rel_rms": float("nan"),
        "blowup": result.blowup,
    }
    manifest = {
        "terminations": terminations,
        "selected_cols": counts,
        "blowup": result.blowup,
        "blowup_step": result.blowup_step,
        "steps_run": result.steps_run,
    }
    return row, manifest


def resolve_config(experiment: str, overrides: dict) -> dict:
    if experiment not in EXPERIMENTS:
        raise ConfigError(
            f"unknown experiment {experiment!r}; choose from {sorted(EXPERIMENTS)}"
        )
    cfg = dict(EXPERIMENTS[experiment])
    cfg["experiment"] = experiment
    for key, value in overrides.items():
        if value is not None:
            cfg[key] = value
    if cfg.get("dt_list") is not None and not cfg["dt_list"]:
        raise ConfigError("dt_list must not be empty")
    if cfg.get("n_list") is not None and not cfg["n_list"]:
        raise ConfigError("n_list must not be empty")
    return cfg


def _sweep_cells(cfg):
    dts = cfg.get("dt_list") or [cfg["dt"]]
    if cfg["kind"] == "heat":
        ns = cfg.get("n_list") or [cfg["n"]]
        size_key = "n"
    else:
        ns = cfg.get("n_list") or [cfg["n_bulk"]]
        size_key = "n_bulk"
    for dt in dts:
        for n in ns:
            cell = dict(cfg)
            cell["dt"] = dt
            cell[size_key] = n
            yield cell


def run_experiment(config: dict) -> int:
    """Run one experiment (or a sweep when dt/n lists are present).

    Returns the process exit code: 0 on completion (blow-ups included),
    2 on configuration errors.
    """
    try:
        outdir = Path(config.get("out") or ".")
        outdir.mkdir(parents=True, exist_ok=True)
        is_sweep = config.get("dt_list") or config.get("n_list")
        runner = _run_heat_cell if config["kind"] == "heat" else _run_bs_cell
        rows = []
        manifests = []
        started = time.perf_counter()
        for cell in _sweep_cells(config):
            row, manifest = runner(cell, outdir, write_snapshots=not is_sweep)
            rows.append(row)
            manifests.append(manifest)
        _write_error_profile(outdir / "error_profile.csv", rows)
        manifest = {
            "experiment": config.get("experiment"),
            "config": {k: v for k, v in config.items() if k != "experiment"},
            "tolerances": _tolerance_record(config),
            "cells": manifests,
            "blowup": any(r["blowup"] for r in rows),
            "wall_time_s": time.perf_counter() - started,
        }
        with open(outdir / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, default=str)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


def _tolerance_record(config) -> dict:
    if not config.get("use_greedy"):
        return {}
    if config.get("variant") == "original":
        tol = default_tolerances()
    else:
        tol = tolerances_from_dt(config["dt"] if not config.get("dt_list") else config["dt_list"][0])
    return {"tau_kappa": tol.tau_kappa, "tau_r": tol.tau_r, "tau_r_prime": tol.tau_r_prime}


def _float_list(text: str):
    return [float(v) for v in text.split(",") if v]


def _int_list(text: str):
    return [int(v) for v in text.split(",") if v]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="greedy-colloc")
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="run one experiment or a dt/n sweep")
    runp.add_argument("experiment")
    runp.add_argument("--dt", type=float)
    runp.add_argument("--dt-list", type=_float_list, dest="dt_list")
    runp.add_argument("--n", type=int)
    runp.add_argument("--n-list", type=_int_list, dest="n_list")
    runp.add_argument("--n-bulk", type=int, dest="n_bulk")
    runp.add_argument("--n-surf", type=int, dest="n_surf")
    runp.add_argument("--epsilon", type=float)
    runp.add_argument("--scheme", choices=["cn", "sbdf1", "sbdf2"])
    runp.add_argument("--no-greedy", action="store_const", const=False, dest="use_greedy")
    runp.add_argument("--t-final", type=float, dest="t_final")
    runp.add_argument("--out")
    runp.add_argument("--config")
    runp.add_argument("--boundary-ring", type=int, dest="boundary_ring")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {}
    if args.config:
        try:
            with open(args.config) as fh:
                overrides.update(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
    for key in ("dt", "dt_list", "n", "n_list", "n_bulk", "n_surf", "epsilon",
                "scheme", "use_greedy", "t_final", "out", "boundary_ring"):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = value
    try:
        config = resolve_config(args.experiment, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return run_experiment(config)


if __name__ == "__main__":
    sys.exit(main())
