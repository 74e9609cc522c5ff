"""Figures written next to the tabular CLI reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import luma_histogram  # noqa: E402


def _series(rows, key):
    by_n = {}
    for r in rows:
        by_n.setdefault(r["N"], []).append((r["M_over_N"], r[key]))
    return {n: sorted(v) for n, v in sorted(by_n.items())}


def plot_sweep(rows, path_prefix, dpi=120):
    """C2C and histogram distance against M/N, one line per block size.

    Writes ``<prefix>_c2c.png`` and ``<prefix>_hist.png``; returns the paths.
    """
    paths = []
    for key, label in (("c2c", "C2C similarity"), ("hist_distance", "Histogram distance")):
        fig, ax = plt.subplots(figsize=(5, 3.2))
        for n_block, pts in _series(rows, key).items():
            x, y = zip(*pts)
            ax.plot(x, y, marker="s", lw=2, label=f"N={n_block:g}")
        ax.set_xlabel("M/N")
        ax.set_ylabel(label)
        ax.legend(ncol=4, fontsize=7)
        ax.grid(alpha=0.3)
        fig.tight_layout()
        path = f"{path_prefix}_{'c2c' if key == 'c2c' else 'hist'}.png"
        fig.savefig(path, dpi=dpi)
        plt.close(fig)
        paths.append(path)
    return paths


def plot_luma_histograms(test_colors, reference_colors, path, dpi=120):
    """Overlay of the normalized luma histograms of two color sets."""
    fig, ax = plt.subplots(figsize=(5, 3.2))
    bins = np.arange(256)
    ax.step(bins, luma_histogram(reference_colors), where="mid", label="reference")
    ax.step(bins, luma_histogram(test_colors), where="mid", label="test")
    ax.set_xlabel("Y")
    ax.set_ylabel("fraction of points")
    ax.set_xlim(0, 255)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
    return path
