"""Static figures derived from a finished run."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _ratio_plot(log, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for ctrl, agent in log.keys():
        if ctrl != "ff":
            continue
        s = [(r.step, r.ratio) for r in log.series(ctrl, agent) if r.ratio is not None]
        if s:
            k, v = zip(*s)
            ax.plot(k, v, lw=0.8, label=f"agent {agent}")
    ax.axhline(0.5, color="k", ls="--", lw=0.8)
    ax.set_xlabel("step")
    ax.set_ylabel(r"$\|e_w\| / \|E^{(0)}\|$")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _wasserstein_plot(log, reports, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for ctrl, agent in log.keys():
        s = log.series(ctrl, agent)
        ls = "-" if ctrl == "ff" else ":"
        ax.plot([r.step for r in s], [r.wasserstein for r in s], ls=ls, lw=0.8,
                label=f"{ctrl} agent {agent}")
        rep = reports.get(f"{ctrl}/{agent}")
        if ctrl == "ff" and rep is not None and rep.bound is not None:
            ax.axhline(rep.bound, color="r", ls=":", lw=0.8)
    ax.set_yscale("log")
    ax.set_xlabel("step")
    ax.set_ylabel("local Wasserstein [m]")
    ax.legend(fontsize=6)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _snapshot_plot(log, path: Path, max_panels: int = 5) -> None:
    snaps = log.snapshots[:max_panels]
    if not snaps:
        return
    ctrls = list(snaps[0]["agents"])
    fig, axes = plt.subplots(len(ctrls), len(snaps), figsize=(2.6 * len(snaps), 2.6 * len(ctrls)),
                             squeeze=False)
    for col, snap in enumerate(snaps):
        pts = snap["cloud"].positions
        for row, ctrl in enumerate(ctrls):
            ax = axes[row][col]
            ax.scatter(pts[:, 0], pts[:, 1], s=2, c="0.6")
            ys = np.array([y for _, y in snap["agents"][ctrl]])
            ax.scatter(ys[:, 0], ys[:, 1], s=18, c="C3" if ctrl == "ff" else "C0", marker="^")
            ax.set_xlim(0, 100)
            ax.set_ylim(0, 100)
            ax.set_aspect("equal")
            ax.set_xticks([])
            ax.set_yticks([])
            ax.set_title(f"{ctrl} k={snap['step']}", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def emit_all(log, reports, out: Path) -> list[str]:
    names = ["ratio_vs_time.png", "wasserstein_vs_time.png", "snapshots.png"]
    _ratio_plot(log, out / names[0])
    _wasserstein_plot(log, reports, out / names[1])
    _snapshot_plot(log, out / names[2])
    return [n for n in names if (out / n).exists()]
