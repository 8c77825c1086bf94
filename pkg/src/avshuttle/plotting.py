"""Matplotlib figures for a run: route overlay and cross-track error over time."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import ReportIOError  # noqa: E402

# strip the version stamp so identical runs give identical bytes
_PNG_META = {"Software": None}


def _save(fig, path: Path):
    try:
        fig.savefig(path, dpi=100, metadata=_PNG_META)
    except OSError as exc:
        raise ReportIOError(path, exc.strerror or str(exc)) from None
    finally:
        plt.close(fig)


def plot_trajectory(log, path):
    fig, ax = plt.subplots(figsize=(7, 5))
    if log.route is not None:
        w = log.route.waypoints
        ax.plot(w[:, 0], w[:, 1], color="red", lw=2.5, label="reference route")
    true_xy = np.array([r.true_pose[:2] for r in log.records])
    ax.plot(true_xy[:, 0], true_xy[:, 1], color="blue", lw=1.0, label="driven path")
    if log.mode == "ndt":
        est = np.array([r.est_pose[:2] for r in log.records])
        ax.plot(est[:, 0], est[:, 1], ".", color="green", ms=2, label="localized")
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.legend(loc="best", fontsize=8)
    ax.set_title(f"path following ({log.status})")
    fig.tight_layout()
    _save(fig, path)


def plot_cross_track(log, path):
    t = np.array([r.t for r in log.records])
    cte = np.array([r.cte for r in log.records])
    fig, ax = plt.subplots(figsize=(7, 3))
    ax.plot(t, cte, color="blue", lw=1.0)
    ax.axhline(0.0, color="grey", lw=0.5)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("cross-track error [m]")
    fig.tight_layout()
    _save(fig, path)


def save_figures(log, out_dir) -> dict:
    out = Path(out_dir)
    paths = {"trajectory_png": out / "trajectory.png", "cte_png": out / "cross_track.png"}
    if not log.records:
        return {}
    plot_trajectory(log, paths["trajectory_png"])
    plot_cross_track(log, paths["cte_png"])
    return paths
