"""Figures written next to the delimited run outputs (PNG, headless backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
}

LOSS_KEYS = ["L_mse", "L_gcl", "L_uniform_d", "L_uniform_t", "L_joint"]


def figsize(scale: float = 1.0, ratio: float | None = None) -> tuple[float, float]:
    width = 6.0 * scale
    ratio = (np.sqrt(5.0) - 1.0) / 2.0 if ratio is None else ratio
    return width, width * ratio


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_history(history: list[dict], path) -> Path:
    """Loss components per epoch (left) and validation metrics when present (right)."""
    with plt.rc_context(STYLE):
        fig, (ax, bx) = plt.subplots(1, 2, figsize=figsize(1.4, 0.4))
        epochs = [r["epoch"] for r in history]
        for key in LOSS_KEYS:
            ax.plot(epochs, [r.get(key, np.nan) for r in history], label=key, lw=1.2 if key == "L_joint" else 0.8)
        ax.set_xlabel("epoch")
        ax.set_ylabel("training loss")
        ax.legend(frameon=False)
        val = [r.get("val_mse") for r in history]
        if any(v is not None for v in val):
            bx.plot(epochs, [np.nan if v is None else v for v in val], label="val MSE", color="C3")
            bx2 = bx.twinx()
            bx2.plot(epochs, [r.get("val_ci") or np.nan for r in history], label="val CI", color="C0", ls="--")
            bx2.set_ylabel("CI")
            bx.set_ylabel("MSE")
            bx.legend(loc="upper left", frameon=False)
            bx2.legend(loc="upper right", frameon=False)
        else:
            bx.text(0.5, 0.5, "no validation split", ha="center", va="center", transform=bx.transAxes)
        bx.set_xlabel("epoch")
        return _save(fig, path)


def plot_ablation(rows, path) -> Path:
    """Mean validation MSE per ablation setting, error bars are the std over seeds."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize(0.8))
        labels = [f"a={r.alpha:g}\nb={r.beta:g}" for r in rows]
        x = np.arange(len(rows))
        ax.bar(x, [r.mse for r in rows], yerr=[r.mse_std for r in rows], color="0.6", capsize=3)
        ax.set_xticks(x)
        ax.set_xticklabels(labels)
        ax.set_ylabel("validation MSE")
        if rows:
            ax.set_title(f"{rows[0].dataset}: {rows[0].mode} ({rows[0].n_seeds} seeds)")
        return _save(fig, path)
