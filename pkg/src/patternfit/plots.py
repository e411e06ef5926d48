"""Figure emission for experiment reports.

Plots are rendered from the CSV files already on disk, so figures and data
cannot drift apart.  Output is SVG (vector graphics), rendered headless.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .dynamics import read_positions_csv


def emit_plots(output_dir: str) -> dict:
    """Write the pattern-overlay scatter and the cost-evolution figure.

    Expects ``positions_final.csv``, ``positions_desired.csv`` and
    ``cost_history.csv`` in ``output_dir``.
    """
    files = {}
    final = read_positions_csv(os.path.join(output_dir, "positions_final.csv"))
    desired = read_positions_csv(os.path.join(output_dir, "positions_desired.csv"))

    fig, ax = plt.subplots(figsize=(5, 5))
    ax.scatter(desired[:, 0], desired[:, 1], s=4, c="black", label="desired pattern")
    ax.scatter(final[:, 0], final[:, 1], s=4, c="red", label="identified control")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.legend(loc="upper right", fontsize=8)
    files["overlay"] = os.path.join(output_dir, "pattern_overlay.svg")
    fig.savefig(files["overlay"], bbox_inches="tight")
    plt.close(fig)

    header, columns = _read_csv_columns(os.path.join(output_dir, "cost_history.csv"))
    iters = columns["iter"]
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    for key in ("total", "j1", "j2", "j3"):
        axes[0].plot(iters, columns[key], marker="o", ms=3, label=key)
    axes[0].set_yscale("log")
    axes[0].set_xlabel("iteration")
    axes[0].set_ylabel("cost")
    axes[0].legend(fontsize=8)
    axes[1].plot(iters, columns["grad_rel"], marker="o", ms=3, color="tab:purple")
    axes[1].set_xlabel("iteration")
    axes[1].set_ylabel("relative gradient norm")
    axes[1].set_yscale("log")
    fig.tight_layout()
    files["cost"] = os.path.join(output_dir, "cost_history.svg")
    fig.savefig(files["cost"], bbox_inches="tight")
    plt.close(fig)
    return files


def _read_csv_columns(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    columns = {}
    for k, name in enumerate(header):
        vals = []
        for row in rows:
            try:
                vals.append(float(row[k]))
            except ValueError:
                vals.append(np.nan)
        columns[name] = np.array(vals)
    return header, columns
