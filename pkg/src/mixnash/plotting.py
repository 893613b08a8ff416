"""Figures for run and sweep reports, written next to the CSV output."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (7.0, 4.3),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.fontsize": 8,
    "savefig.dpi": 120,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)


def plot_actions(traj, path):
    """Every action coordinate against time, with the equilibrium as a dashed line."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        x = traj.x
        n, d = x.shape[1], x.shape[2]
        for i in range(n):
            for k in range(d):
                ax.plot(traj.t, x[:, i, k], lw=1.0, label=f"$x_{{{i + 1}{k + 1}}}$")
        if traj.x_star is not None:
            for val in np.unique(np.round(traj.x_star, 12)):
                ax.axhline(val, color="k", ls="--", lw=0.8)
        ax.set_xlabel("t [s]")
        ax.set_ylabel("action")
        ax.legend(ncol=2, loc="upper right")
        return _save(fig, path)


def plot_velocities(traj, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        v = traj.v
        for r, i in enumerate(traj.layout.second):
            for k in range(v.shape[2]):
                ax.plot(traj.t, v[:, r, k], lw=1.0, label=f"$v_{{{i + 1}{k + 1}}}$")
        ax.set_xlabel("t [s]")
        ax.set_ylabel("velocity")
        if v.shape[1]:
            ax.legend(loc="upper right")
        return _save(fig, path)


def plot_convergence(traj, path):
    """Error, velocity norm and Lyapunov surrogate on a log scale."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        floor = np.finfo(float).tiny
        for series, label in ((traj.err_x, r"$\|x-x^*\|$"), (traj.err_v, r"$\|v_s\|$"), (traj.V, "V")):
            if np.all(np.isfinite(series)):
                ax.semilogy(traj.t, np.maximum(series, floor), lw=1.0, label=label)
        ax.set_xlabel("t [s]")
        ax.legend()
        return _save(fig, path)


def plot_weights(traj, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for i in range(traj.wnorm.shape[1]):
            ax.plot(traj.t, traj.wnorm[:, i], lw=1.0, label=f"player {i + 1}")
        ax.axhline(traj.scenario.rbf.w_max, color="k", ls="--", lw=0.8, label="cap")
        ax.set_xlabel("t [s]")
        ax.set_ylabel(r"tr$(\hat W_i^T \hat W_i)$")
        ax.legend()
        return _save(fig, path)


def render_run_figures(traj, outdir):
    outdir = Path(outdir)
    paths = [plot_actions(traj, outdir / "actions.png"),
             plot_convergence(traj, outdir / "convergence.png")]
    if len(traj.layout.second):
        paths.append(plot_velocities(traj, outdir / "velocities.png"))
    if traj.scenario.variant == "full":
        paths.append(plot_weights(traj, outdir / "weights.png"))
    return paths


def render_sweep_figure(rows, path):
    """Final-window error per sweep point (blown-up points marked on the axis)."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        pts = [r["point"] for r in rows]
        vals = [r["final_window_err"] if r.get("final_window_err") is not None else np.nan for r in rows]
        ax.semilogy(pts, vals, "o-")
        bad = [r["point"] for r in rows if r.get("blown_up")]
        if bad:
            ax.plot(bad, [ax.get_ylim()[1]] * len(bad), "rx", label="blown up")
            ax.legend()
        ax.set_xlabel("sweep point")
        ax.set_ylabel("final-window mean error")
        return _save(fig, path)
