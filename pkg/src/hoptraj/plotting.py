"""PNG figures for a simulation log.

Kept apart from the simulation core, which only writes plot data.  Uses the
non-interactive Agg backend so it works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .sim import STATE_NAMES, TrajectoryLog  # noqa: E402

_AXES = {"x": 0, "y": 1, "z": 2}


def _plane(ax, log_: TrajectoryLog, h: str, v: str):
    i, j = _AXES[h], _AXES[v]
    air = log_.aerial
    d, a = log_.desired, log_.actual
    for hop in np.unique(log_.hop[air]):
        m = air & (log_.hop == hop)
        ax.plot(d[m, i], d[m, j], "--", color="tab:blue", lw=1.0, label="desired" if hop == 0 else None)
        ax.plot(a[m, i], a[m, j], color="tab:red", lw=1.0, label="actual" if hop == 0 else None)
    ax.set_xlabel(f"{h} [m]")
    ax.set_ylabel(f"{v} [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.grid(True, lw=0.3)
    ax.legend(loc="best", fontsize=8)


def plot_planes(log_: TrajectoryLog, out_dir, stem: str) -> list[Path]:
    out_dir = Path(out_dir)
    paths = []
    for v in ("z", "y"):
        fig, ax = plt.subplots(figsize=(6, 4))
        _plane(ax, log_, "x", v)
        ax.set_title(f"{stem}: {v}-x plane")
        p = out_dir / f"{stem}_plane_{v}x.png"
        fig.tight_layout()
        fig.savefig(p, dpi=120)
        plt.close(fig)
        paths.append(p)
    return paths


def plot_states(log_: TrajectoryLog, out_dir, stem: str) -> Path:
    """Position, velocity, attitude and rate histories, desired dashed."""
    fig, axes = plt.subplots(4, 1, figsize=(7, 9), sharex=True)
    groups = [(0, "position [m]"), (3, "velocity [m/s]"), (6, "attitude [deg]"), (9, "rates [rad/s]")]
    t = log_.t
    for ax, (k, label) in zip(axes, groups):
        scale = np.degrees(1.0) if k == 6 else 1.0
        for c in range(3):
            line, = ax.plot(t, scale * log_.actual[:, k + c], lw=0.9, label=STATE_NAMES[k + c])
            ax.plot(t, scale * log_.desired[:, k + c], "--", lw=0.7, color=line.get_color())
        ax.set_ylabel(label)
        ax.grid(True, lw=0.3)
        ax.legend(loc="upper right", fontsize=7, ncol=3)
    axes[-1].set_xlabel("t [s]")
    axes[0].set_title(f"{stem}: states (dashed = desired)")
    fig.tight_layout()
    p = Path(out_dir) / f"{stem}_states.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    return p


def render(log_: TrajectoryLog, out_dir, stem: str) -> list[Path]:
    return plot_planes(log_, out_dir, stem) + [plot_states(log_, out_dir, stem)]
