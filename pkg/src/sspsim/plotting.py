"""PNG figures for reports: the feasibility heatmap and a radio timeline."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.figure import Figure

_OUTCOME_COLOURS = {"DELIVERED": "tab:green", "COLLIDED": "tab:orange", "JAMMED": "tab:red"}
# Fixed metadata keeps repeated renders byte-identical.
_PNG_METADATA = {"Software": None}


def plot_matrix(matrix) -> Figure:
    data = np.array([[matrix.cells[(row, col)] for col in matrix.columns] for row in matrix.rows])
    labels = [f"{pair} {'OOB' if oob == 'yes' else ''}".strip() for pair, oob in map(matrix.row_label, matrix.rows)]
    fig = Figure(figsize=(2.0 + 1.3 * len(matrix.columns), 0.3 * len(labels) + 1.5))
    ax = fig.add_subplot()
    im = ax.imshow(data, cmap="Reds", vmin=0.0, vmax=1.0, aspect="auto")
    ax.set_xticks(range(len(matrix.columns)), matrix.columns)
    ax.set_yticks(range(len(labels)), labels, fontsize=7)
    for i in range(data.shape[0]):
        for j in range(data.shape[1]):
            ax.text(j, i, f"{data[i, j]:.2f}", ha="center", va="center", fontsize=6,
                    color="white" if data[i, j] > 0.5 else "black")
    ax.set_title(f"MITM success rate ({matrix.n_seeds} seeds)")
    fig.colorbar(im, ax=ax, fraction=0.05)
    fig.tight_layout()
    return fig


def plot_delivery(result) -> Figure:
    fig = Figure(figsize=(8, 4))
    ax = fig.add_subplot()
    points: dict = {}
    for line in result.delivery_log[1:]:
        slot, channel, _, _, outcome, _ = line.split(",")
        points.setdefault(outcome, ([], []))
        points[outcome][0].append(int(slot))
        points[outcome][1].append(int(channel))
    for outcome in sorted(points):
        xs, ys = points[outcome]
        ax.scatter(xs, ys, s=8, c=_OUTCOME_COLOURS.get(outcome, "grey"), label=f"{outcome} ({len(xs)})")
    ax.set_xlabel("slot")
    ax.set_ylabel("channel")
    ax.set_ylim(-1, 79)
    ax.set_title(f"radio frames: {result.outcome.value}")
    if points:
        ax.legend(loc="upper right", fontsize=7)
    fig.tight_layout()
    return fig


def save_figure(obj, path) -> Path:
    fig = plot_matrix(obj) if hasattr(obj, "records") else plot_delivery(obj)
    path = Path(path)
    fig.savefig(path, dpi=110, metadata=_PNG_METADATA)
    return path
