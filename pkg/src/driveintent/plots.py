"""Static report figures: ablation curves and confusion-matrix heatmaps."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .labels import CLASS_ORDER

_METRICS = ("accuracy", "precision", "recall", "f1")


def ablation_curves(results: dict, out_dir: str | Path) -> list[Path]:
    """One figure per metric: x = horizon T, one series per preset."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for metric in _METRICS:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for letter, rows in results.items():
            ts = [r.T for r in rows]
            ys = [getattr(r, metric) for r in rows]
            ax.plot(ts, ys, marker="o", label=letter)
        ax.set_xlabel("time to maneuver T (s)")
        ax.set_ylabel(f"{metric} (%)")
        ax.set_xticks(sorted({r.T for rows in results.values() for r in rows}))
        ax.legend(title="preset")
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        path = out_dir / f"ablation_{metric}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written


def confusion_heatmap(cm: np.ndarray, T: int, path: str | Path) -> Path:
    cm = np.asarray(cm)
    fig, ax = plt.subplots(figsize=(4.5, 4))
    im = ax.imshow(cm, cmap="Blues")
    names = [l.value for l in CLASS_ORDER]
    ax.set_xticks(range(len(names)), names, rotation=45, ha="right", fontsize=7)
    ax.set_yticks(range(len(names)), names, fontsize=7)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title(f"T = {T}")
    thresh = cm.max() / 2 if cm.max() else 0.5
    for i in range(cm.shape[0]):
        for j in range(cm.shape[1]):
            ax.text(
                j, i, str(cm[i, j]), ha="center", va="center",
                color="white" if cm[i, j] > thresh else "black", fontsize=8,
            )
    fig.colorbar(im, fraction=0.046)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
