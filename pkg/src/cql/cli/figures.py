"""Figure rendering for the report paths.

PNG companions to the machine-readable outputs: a loss curve next to the
CSV, AP bars and density curves next to the JSON, a sweep chart per
ablation axis, and attention montages next to the PGM maps. The delimited
files stay the authoritative record; these exist to be looked at.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path) -> None:
    fig.savefig(path, dpi=120)
    plt.close(fig)


def loss_curve_png(curve: list, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.5), constrained_layout=True)
    ax.plot(range(len(curve)), curve, lw=1.0)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.set_title("training loss")
    ax.grid(True, alpha=0.3)
    _save(fig, path)


def ap_bars_png(per_category_ap: list, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.5), constrained_layout=True)
    xs = np.arange(len(per_category_ap))
    values = [0.0 if ap is None else ap for ap in per_category_ap]
    colors = ["lightgray" if ap is None else "steelblue"
              for ap in per_category_ap]
    ax.bar(xs, values, color=colors)
    for x, ap in zip(xs, per_category_ap):
        if ap is None:
            ax.text(x, 0.02, "n/a", ha="center", fontsize=8, rotation=90)
    ax.set_xlabel("category")
    ax.set_ylabel("AP")
    ax.set_ylim(0, 1.05)
    ax.set_title("per-category AP")
    _save(fig, path)


def sweep_png(labels: list, values: list, path, axis_name: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.5), constrained_layout=True)
    xs = np.arange(len(labels))
    ax.plot(xs, values, marker="o")
    ax.set_xticks(xs, [str(label) for label in labels])
    ax.set_xlabel(axis_name)
    ax.set_ylabel("mAP")
    ax.set_ylim(0, 1.05)
    ax.set_title(f"sweep over {axis_name}")
    ax.grid(True, alpha=0.3)
    _save(fig, path)


def density_png(buckets: dict, baseline: dict, ratios: dict, path) -> None:
    fig, (top, bottom) = plt.subplots(
        2, 1, figsize=(6, 5), sharex=True, constrained_layout=True)
    labels = list(buckets)
    xs = np.arange(len(labels))
    top.bar(xs - 0.2, [baseline[b] for b in labels], width=0.4,
            label="baseline", color="lightgray")
    top.bar(xs + 0.2, [buckets[b] for b in labels], width=0.4,
            label="model", color="steelblue")
    top.set_ylabel("mAP")
    top.legend()
    top.set_title("per-density-bucket mAP")
    defined = [(x, ratios[b]) for x, b in zip(xs, labels)
               if ratios[b] is not None]
    if defined:
        bottom.plot([x for x, _ in defined], [r for _, r in defined],
                    marker="o", color="darkorange")
    bottom.axhline(0.0, color="gray", lw=0.8)
    bottom.set_ylabel("relative improvement")
    bottom.set_xlabel("instances of a category per image")
    bottom.set_xticks(xs, labels)
    _save(fig, path)


def attention_montage_png(maps: list, path) -> None:
    """maps: list of (title, 2-d array) pairs, one panel each."""
    cols = min(4, max(1, len(maps)))
    rows = (len(maps) + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(2.2 * cols, 2.2 * rows),
                             constrained_layout=True, squeeze=False)
    for ax in axes.flat:
        ax.set_axis_off()
    for ax, (title, grid) in zip(axes.flat, maps):
        ax.imshow(grid, cmap="gray", vmin=0.0)
        ax.set_title(title, fontsize=8)
        ax.set_axis_on()
        ax.set_xticks([])
        ax.set_yticks([])
    _save(fig, path)
