"""Figures written next to the delimited reports."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "xtick.labelsize": 7,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
}


def plot_class_f1(rows: Sequence[tuple[str, str, float]], path: str | Path, title: str = "F1 by PHI type") -> Path:
    """Grouped bars of per-class F1, one colour per model."""
    models = list(dict.fromkeys(m for m, _, _ in rows))
    classes = list(dict.fromkeys(c for _, c, _ in rows))
    lookup = {(m, c): f for m, c, f in rows}
    x = np.arange(len(classes))
    width = 0.8 / max(len(models), 1)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(6.0, 0.45 * len(classes) + 2), 3.6))
        for i, m in enumerate(models):
            vals = [lookup.get((m, c), 0.0) for c in classes]
            ax.bar(x + (i - (len(models) - 1) / 2) * width, vals, width, label=m)
        ax.set_xticks(x)
        ax.set_xticklabels(classes, rotation=60, ha="right")
        ax.set_ylim(0, 1.05)
        ax.set_ylabel("F1")
        ax.set_title(title)
        if len(models) > 1:
            ax.legend(frameon=False, ncol=min(len(models), 3))
        fig.tight_layout()
        path = Path(path)
        fig.savefig(path)
        plt.close(fig)
    return path


def plot_loss_curves(curves: dict[str, Sequence[float]], path: str | Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.2))
        for label, losses in curves.items():
            ax.plot(np.arange(1, len(losses) + 1), losses, label=label, lw=1.2)
        ax.set_xlabel("epoch")
        ax.set_ylabel("mean training loss")
        ax.set_yscale("log")
        if len(curves) > 1:
            ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return Path(path)
