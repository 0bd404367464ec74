"""Figure rendering for the CLI report paths.

Every function takes data already written to the delimited outputs and saves
a PNG next to them. Rendering is optional everywhere (``--no-figures``) and
nothing downstream reads the images back.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 150


def save_field(grid: np.ndarray, title: str, path) -> None:
    """Heatmap of a reconstructed mode grid."""
    fig, ax = plt.subplots(figsize=(4.2, 3.6))
    im = ax.imshow(
        grid.T, origin="lower", cmap="RdBu_r", vmin=-1.0, vmax=1.0, aspect="equal"
    )
    ax.set_xlabel("x node")
    ax.set_ylabel("y node")
    ax.set_title(title)
    fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_trace(trace: np.ndarray, analytic: list[float] | None, title: str, path) -> None:
    """Cost and per-state energies against iteration, log-scaled cost error."""
    fig, axes = plt.subplots(1, 2, figsize=(8.0, 3.4))
    iters = trace[:, 0]
    axes[0].plot(iters, trace[:, 1], lw=1.2)
    axes[0].set_xlabel("iteration")
    axes[0].set_ylabel("weighted cost")
    axes[0].set_title(title)
    for j in range(trace.shape[1] - 2):
        axes[1].plot(iters, trace[:, 2 + j], lw=1.2, label=f"E{j}")
    if analytic:
        for j, value in enumerate(analytic):
            axes[1].axhline(value, color="k", ls="--", lw=0.7)
    axes[1].set_xlabel("iteration")
    axes[1].set_ylabel("energy")
    axes[1].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_noise_sweep(rows: list[dict], analytic: list[float], title: str, path) -> None:
    """Final E0/E1 error vs noise level, one line per seed average."""
    levels = sorted({float(r["level"]) for r in rows})
    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    for j, ref in enumerate(analytic):
        means = []
        for level in levels:
            finals = {}
            for r in rows:
                if float(r["level"]) != level:
                    continue
                finals[(r["seed"])] = float(r[f"E{j}"])  # last iter row wins
            means.append(np.mean([abs(v - ref) for v in finals.values()]))
        ax.plot(levels, means, marker="o", label=f"|E{j} - analytic|")
    ax.set_xlabel("depolarizing strength per gate")
    ax.set_ylabel("mean absolute error")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_search(records: list[dict], title: str, path) -> None:
    """Per-episode best energy and reward sum."""
    episodes = [int(r["episode"]) for r in records]
    best = [float(r["best_energy"]) for r in records]
    rewards = [float(r["reward_sum"]) for r in records]
    fig, axes = plt.subplots(1, 2, figsize=(8.0, 3.4))
    axes[0].plot(episodes, best, lw=0.9)
    axes[0].plot(episodes, np.minimum.accumulate(best), lw=1.4, label="best so far")
    axes[0].set_xlabel("episode")
    axes[0].set_ylabel("best weighted energy")
    axes[0].legend(fontsize=8)
    axes[0].set_title(title)
    axes[1].plot(episodes, rewards, lw=0.9, color="tab:orange")
    axes[1].set_xlabel("episode")
    axes[1].set_ylabel("reward sum")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_resources(metrics: dict[str, dict[str, float]], title: str, path) -> None:
    """Grouped bars of gate counts per circuit column."""
    rows = ["ry_gates", "cnot_gates", "total_gates"]
    columns = list(metrics.keys())
    x = np.arange(len(rows))
    width = 0.8 / max(len(columns), 1)
    fig, ax = plt.subplots(figsize=(4.8, 3.4))
    for i, col in enumerate(columns):
        vals = [metrics[col].get(r, 0) for r in rows]
        ax.bar(x + i * width, vals, width, label=col)
    ax.set_xticks(x + width * (len(columns) - 1) / 2)
    ax.set_xticklabels(["RY", "CNOT", "total"])
    ax.set_ylabel("gate count")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
