"""Figures written next to the CSV/raw outputs of the CLI."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def plot_pr_curves(curves, path, title="Precision-recall"):
    """``curves`` maps a label to a :class:`~sunn.evaluation.PRCurve`."""
    fig, ax = plt.subplots(figsize=(5, 4))
    for label, c in curves.items():
        ax.plot(c.recall, c.precision, marker=".", ms=3, lw=1.2, label=label)
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_xlim(0, 1.02)
    ax.set_ylim(0, 1.02)
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(loc="lower left", fontsize=8)
    return _save(fig, path)


def plot_maps(image, cmap_img, prmap_img, path):
    fig, axes = plt.subplots(1, 3, figsize=(10, 3.4))
    axes[0].imshow(image, cmap="gray" if np.ndim(image) == 2 else None)
    axes[0].set_title("input")
    axes[1].imshow(cmap_img, cmap="gray", vmin=0, vmax=1)
    axes[1].set_title("c-map")
    if prmap_img is not None:
        im = axes[2].imshow(prmap_img, cmap="jet")
        fig.colorbar(im, ax=axes[2], fraction=0.046)
        axes[2].set_title("potential residue")
    for a in axes:
        a.set_axis_off()
    return _save(fig, path)


def plot_histogram(hist, thresholds, path):
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.bar(hist.centers, hist.counts, width=np.diff(hist.edges), color="0.6", edgecolor="none")
    for t in np.atleast_1d(thresholds):
        ax.axvline(t, color="C3", lw=1)
    ax.set_xlabel("residue")
    ax.set_ylabel("pixels")
    return _save(fig, path)


def plot_masks(masks, path):
    n = max(len(masks), 1)
    fig, axes = plt.subplots(1, n, figsize=(3 * n, 3), squeeze=False)
    for a, m in zip(axes[0], masks):
        a.imshow(m, cmap="gray")
        a.set_axis_off()
    return _save(fig, path)


def plot_trace(totals, path):
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.plot(np.arange(len(totals)), totals)
    ax.set_xlabel("iteration")
    ax.set_ylabel("total residue")
    ax.grid(alpha=0.3)
    return _save(fig, path)


def plot_robustness(seeds, ious, path, threshold=None):
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.bar([str(s) for s in seeds], ious, color="C0")
    if threshold is not None:
        ax.axhline(threshold, color="C3", ls="--", lw=1)
    ax.set_ylim(0, 1.05)
    ax.set_xlabel("noise seed")
    ax.set_ylabel("IoU clean vs noisy")
    return _save(fig, path)


def plot_bench(rows, path):
    fig, ax = plt.subplots(figsize=(5, 3))
    names = [r["stage"] for r in rows]
    ax.barh(names, [r["seconds"] for r in rows], color="C2")
    ax.set_xlabel("seconds (median)")
    return _save(fig, path)
