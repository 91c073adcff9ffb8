"""Figure rendering for the CLI report paths.

Every command that emits delimited output also renders a small matplotlib
figure next to it; these helpers keep the plotting in one place and off the
library's hot paths.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def training_curves(history, path) -> None:
    """Train/val MSE and learning rate over iterations."""
    rows = np.asarray(history, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(rows[:, 0], rows[:, 1], label="train MSE", color="tab:blue")
    ax.plot(rows[:, 0], rows[:, 2], label="val MSE", color="tab:orange")
    ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("standardized MSE")
    ax.legend(loc="upper right")
    ax2 = ax.twinx()
    ax2.plot(rows[:, 0], rows[:, 3], color="tab:gray", alpha=0.5, label="lr")
    ax2.set_yscale("log")
    ax2.set_ylabel("learning rate", color="tab:gray")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def residual_figure(targets_std, preds_std, path) -> None:
    """Residual histogram plus prediction-vs-target scatter."""
    residuals = np.asarray(preds_std) - np.asarray(targets_std)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 4.0))
    ax1.hist(residuals, bins=60, color="tab:blue", alpha=0.8)
    ax1.set_xlabel("residual (standardized)")
    ax1.set_ylabel("events")
    ax2.plot(targets_std, preds_std, ".", markersize=2, alpha=0.4)
    lo = min(np.min(targets_std), np.min(preds_std))
    hi = max(np.max(targets_std), np.max(preds_std))
    ax2.plot([lo, hi], [lo, hi], color="tab:gray", linewidth=1)
    ax2.set_xlabel("target (standardized)")
    ax2.set_ylabel("prediction")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def violation_figure(checks: list[dict], path) -> None:
    """Measured violation vs tolerance per verification stage."""
    stages = [c["stage"] for c in checks]
    values = np.array([max(c["value"], 1e-300) for c in checks])
    tols = np.array([c["tolerance"] for c in checks])
    x = np.arange(len(stages))
    fig, ax = plt.subplots(figsize=(max(6.0, 1.1 * len(stages)), 4.2))
    colors = ["tab:green" if c["pass"] else "tab:red" for c in checks]
    ax.bar(x, values, color=colors, alpha=0.85, label="measured")
    ax.plot(x, tols, "k_", markersize=22, label="tolerance")
    ax.set_yscale("log")
    ax.set_xticks(x)
    ax.set_xticklabels(stages, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("max violation")
    ax.legend(loc="upper left")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def benchmark_figure(timings: dict[str, float], path) -> None:
    names = list(timings)
    values = [timings[k] for k in names]
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.barh(names, values, color="tab:blue", alpha=0.85)
    ax.set_xlabel("milliseconds")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
