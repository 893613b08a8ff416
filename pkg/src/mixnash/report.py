"""Trajectory CSV, summary JSON and sweep CSV writers."""

import csv
import json
from pathlib import Path

import numpy as np

from .sim import SCHEMA_VERSION


def trajectory_columns(traj):
    L = traj.layout
    cols = ["t"]
    cols += [f"x_{i + 1}_{k + 1}" for i in range(L.n) for k in range(L.d)]
    cols += [f"v_{i + 1}_{k + 1}" for i in L.second for k in range(L.d)]
    cols += [f"z_{i + 1}_{k + 1}" for i in L.first for k in range(L.d)]
    cols += [f"wnorm_{i + 1}" for i in range(L.n)]
    cols += ["err_x", "err_v", "V"]
    return cols


def trajectory_table(traj):
    L = traj.layout
    K = len(traj.t)
    return np.column_stack([
        traj.t,
        traj.states[:, L.x_idx],
        traj.states[:, L.vs],
        traj.states[:, L.zf],
        traj.wnorm.reshape(K, -1),
        traj.err_x, traj.err_v, traj.V,
    ])


def _fmt(v):
    return repr(float(v))


def write_trajectory_csv(traj, path):
    """One row per recorded sample; the first line carries the schema version."""
    path = Path(path)
    table = trajectory_table(traj)
    with path.open("w", newline="") as fh:
        fh.write(f"# schema_version={SCHEMA_VERSION}\n")
        fh.write(",".join(trajectory_columns(traj)) + "\n")
        for row in table:
            fh.write(",".join(map(_fmt, row)) + "\n")
    return path


def read_trajectory_csv(path):
    """Returns ``(schema_version, columns, data)``."""
    with open(path) as fh:
        first = fh.readline().strip()
        if not first.startswith("# schema_version="):
            raise ValueError("missing schema_version comment line")
        version = int(first.split("=", 1)[1])
        cols = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return version, cols, data


def write_summary_json(summary, path):
    path = Path(path)
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return path


SWEEP_FIELDS = ["point", "k1", "k2", "k3", "k4", "beta", "dt", "final_err_2", "final_err_inf",
                "final_window_err", "final_vnorm", "fitted_rate", "max_wnorm", "blown_up", "error"]


def write_sweep_csv(rows, path):
    path = Path(path)
    extra = sorted({k for r in rows for k in r if k not in SWEEP_FIELDS},
                   key=lambda k: (not k.startswith("xT_"), k))
    with path.open("w", newline="") as fh:
        fh.write(f"# schema_version={SCHEMA_VERSION}\n")
        w = csv.DictWriter(fh, fieldnames=SWEEP_FIELDS + extra, restval="")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if v is None else v) for k, v in r.items()})
    return path


def read_sweep_csv(path):
    with open(path) as fh:
        fh.readline()
        return list(csv.DictReader(fh))


def gnuplot_script(traj, csv_name="trajectory.csv"):
    """Plain-text gnuplot script plotting actions, velocities and the error from the CSV."""
    cols = trajectory_columns(traj)
    idx = {c: k + 1 for k, c in enumerate(cols)}
    xs = [c for c in cols if c.startswith("x_")]
    vs = [c for c in cols if c.startswith("v_")]
    lines = [
        "# gnuplot script; run with: gnuplot plot.gp",
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set key autotitle columnhead outside right",
        "set terminal pngcairo size 900,600",
        "set xlabel 't [s]'",
        "set output 'actions.png'",
        "set ylabel 'action'",
        "plot " + ", ".join(f"'{csv_name}' using 1:{idx[c]} with lines" for c in xs),
    ]
    if vs:
        lines += ["set output 'velocities.png'", "set ylabel 'velocity'",
                  "plot " + ", ".join(f"'{csv_name}' using 1:{idx[c]} with lines" for c in vs)]
    lines += ["set output 'error.png'", "set logscale y", "set ylabel '|x - x*|'",
              f"plot '{csv_name}' using 1:{idx['err_x']} with lines title 'err_x'", ""]
    return "\n".join(lines)
