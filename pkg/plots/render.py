#!/usr/bin/env python3
"""Render solver CSV outputs as PNG figures.

Four figure kinds, all driven by the CSV files the CLI writes:

  error-profile   log-log error vs time step from an error-profile CSV;
                  shaded min/max band over the point counts with the median
                  as a dashed line, one marker per run colored by the
                  stopping rule that ended the greedy selection
                  (AllColumns: black, SC1Prime: red, SC2Prime: blue).
  residual-curve  residual and condition-number trace of a greedy iteration
                  log against the number of selected columns.
  pattern-2d      scatter of a planar field snapshot colored by value.
  pattern-3d      the same for three-dimensional snapshots.

Inputs are read-only; re-rendering is idempotent.  Exits 2 with the
offending column name when a CSV does not match its schema.

Usage:
    python plots/render.py --kind error-profile --in error_profile.csv --out fig.png
    python plots/render.py --kind pattern-2d --in u.csv --out u.png
"""

from __future__ import annotations

import argparse
import csv
import math
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

TERMINATION_COLORS = {
    "AllColumns": "black",
    "SC1Prime": "red",
    "SC2Prime": "blue",
    "SC1": "dimgray",
    "SC2": "darkgray",
}

KINDS = ("error-profile", "residual-curve", "pattern-2d", "pattern-3d")


class SchemaError(ValueError):
    pass


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def require_columns(rows, needed, path):
    have = set(rows[0].keys()) if rows else set()
    for col in needed:
        if col not in have:
            raise SchemaError(f"{path}: missing column {col!r}")


def median(values):
    ordered = sorted(values)
    n = len(ordered)
    if n == 0:
        raise ValueError("median of empty list")
    mid = n // 2
    if n % 2:
        return ordered[mid]
    return 0.5 * (ordered[mid - 1] + ordered[mid])


def _finite_errors(rows):
    for row in rows:
        err = float(row["final_rel_rms"])
        if math.isfinite(err):
            yield row, err


def render_error_profile(path, out, overlay=None):
    rows = read_rows(path)
    require_columns(rows, ["dt", "n", "final_rel_rms", "termination"], path)
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    by_dt = {}
    for row, err in _finite_errors(rows):
        by_dt.setdefault(float(row["dt"]), []).append(err)
    dts = sorted(by_dt)
    if dts:
        lo = [min(by_dt[dt]) for dt in dts]
        hi = [max(by_dt[dt]) for dt in dts]
        med = [median(by_dt[dt]) for dt in dts]
        ax.fill_between(dts, lo, hi, alpha=0.25, color="steelblue",
                        label="range over n")
        ax.plot(dts, med, "--", color="steelblue", label="median")
    for row, err in _finite_errors(rows):
        # bulk-surface rows carry one termination per field
        term = row["termination"].split(";")[0]
        ax.plot(float(row["dt"]), err, "o", ms=5,
                color=TERMINATION_COLORS.get(term, "gray"))
    if overlay:
        rows2 = read_rows(overlay)
        require_columns(rows2, ["dt", "final_rel_rms"], overlay)
        pts = sorted((float(r["dt"]), e) for r, e in _finite_errors(rows2))
        if pts:
            ax.plot([p[0] for p in pts], [p[1] for p in pts], ":", color="gray",
                    label="overlay")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("time step")
    ax.set_ylabel("relative RMS error")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(out, dpi=130)
    plt.close(fig)


def render_residual_curve(path, out, overlay=None):
    rows = read_rows(path)
    require_columns(
        rows, ["cols", "kappa", "res_inf_selected", "res_inf_fullrow"], path
    )
    cols = [int(r["cols"]) for r in rows]
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ax.plot(cols, [float(r["res_inf_fullrow"]) for r in rows], "o-",
            color="royalblue", label="residual, all rows")
    ax.plot(cols, [max(float(r["res_inf_selected"]), 1e-18) for r in rows], "s--",
            color="slategray", label="residual, selected rows")
    ax.set_yscale("log")
    ax.set_xlabel("selected columns")
    ax.set_ylabel("residual (inf norm)")
    ax2 = ax.twinx()
    ax2.plot(cols, [float(r["kappa"]) for r in rows], "^-", color="firebrick",
             label="condition number")
    ax2.set_yscale("log")
    ax2.set_ylabel("condition number")
    lines, labels = ax.get_legend_handles_labels()
    lines2, labels2 = ax2.get_legend_handles_labels()
    ax.legend(lines + lines2, labels + labels2, loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(out, dpi=130)
    plt.close(fig)


def _pattern_columns(rows, path, dim):
    needed = ["x", "y", "value"] if dim == 2 else ["x", "y", "z", "value"]
    require_columns(rows, needed, path)
    return [[float(r[c]) for r in rows] for c in needed]


def render_pattern_2d(path, out, overlay=None):
    rows = read_rows(path)
    x, y, value = _pattern_columns(rows, path, 2)
    fig, ax = plt.subplots(figsize=(5.0, 4.5))
    sc = ax.scatter(x, y, c=value, s=14, cmap="viridis")
    ax.set_aspect("equal")
    fig.colorbar(sc, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(out, dpi=130)
    plt.close(fig)


def render_pattern_3d(path, out, overlay=None):
    rows = read_rows(path)
    x, y, z, value = _pattern_columns(rows, path, 3)
    fig = plt.figure(figsize=(5.5, 5.0))
    ax = fig.add_subplot(projection="3d")
    sc = ax.scatter(x, y, z, c=value, s=10, cmap="viridis")
    fig.colorbar(sc, ax=ax, shrink=0.7)
    fig.tight_layout()
    fig.savefig(out, dpi=130)
    plt.close(fig)


RENDERERS = {
    "error-profile": render_error_profile,
    "residual-curve": render_residual_curve,
    "pattern-2d": render_pattern_2d,
    "pattern-3d": render_pattern_3d,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="render.py", description=__doc__)
    parser.add_argument("--kind", choices=KINDS, required=True)
    parser.add_argument("--in", dest="input", required=True)
    parser.add_argument("--in2", dest="input2")
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    try:
        RENDERERS[args.kind](args.input, args.out, overlay=args.input2)
    except (SchemaError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
