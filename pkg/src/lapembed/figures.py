"""Matplotlib figure rendering for the CLI report paths.

All figures are written to files; no interactive backend is required.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_training_curves(report, path) -> None:
    """Loss terms, learning rate, and collapse diagnostics per epoch."""
    epochs = [r.epoch for r in report.records]
    fig, axes = plt.subplots(1, 3, figsize=(13, 3.6))
    axes[0].plot(epochs, [r.trace_term for r in report.records], label="trace")
    axes[0].plot(epochs, [r.decorrelation_term for r in report.records],
                 label="decorrelation")
    axes[0].plot(epochs, [r.total for r in report.records], label="total",
                 linestyle="--")
    axes[0].set_yscale("log")
    axes[0].set_xlabel("epoch")
    axes[0].set_title("loss terms")
    axes[0].legend()
    axes[1].plot(epochs, [r.learning_rate for r in report.records])
    axes[1].set_xlabel("epoch")
    axes[1].set_title("learning rate")
    axes[2].plot(epochs, [r.effective_rank for r in report.records],
                 label="effective rank")
    ax2 = axes[2].twinx()
    ax2.plot(epochs, [r.min_dim_std for r in report.records], color="tab:red",
             label="min dim std")
    ax2.set_yscale("log")
    axes[2].set_xlabel("epoch")
    axes[2].set_title("collapse diagnostics")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_embedding_scatter(embedding: np.ndarray, path,
                             labels: np.ndarray | None = None) -> None:
    """Scatter of the first two embedding coordinates (second coordinate
    alone if the embedding is one-dimensional)."""
    z = np.asarray(embedding, dtype=float)
    fig, ax = plt.subplots(figsize=(5, 4.5))
    xs = z[:, 0]
    ys = z[:, 1] if z.shape[1] > 1 else np.zeros_like(xs)
    if labels is not None:
        ax.scatter(xs, ys, c=labels, s=14, cmap="coolwarm")
    else:
        ax.scatter(xs, ys, color="tab:blue", s=14)
    ax.set_xlabel("eigenvector 1")
    ax.set_ylabel("eigenvector 2" if z.shape[1] > 1 else "")
    ax.set_title("spectral embedding")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
