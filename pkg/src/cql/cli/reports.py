"""Machine-readable report writers.

Everything here is byte-deterministic: JSON is sorted and newline-terminated,
CSV floats use repr (shortest round-trip form), and PGM heatmaps are plain
text. Figures live in figures.py and are presentation only.
"""
from __future__ import annotations

import csv
import json

import numpy as np


def write_json(payload: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def write_loss_curve(curve: list, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "loss"])
        for step, value in enumerate(curve):
            writer.writerow([step, repr(float(value))])


def read_loss_curve(path) -> list:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    return [float(value) for _, value in rows[1:]]


def write_pgm(values: np.ndarray, path) -> None:
    """Text PGM (P2), max-normalized per map to the 0..255 gray range."""
    grid = np.asarray(values, dtype=np.float64)
    if grid.ndim != 2:
        raise ValueError(f"PGM wants a 2-d map, got shape {grid.shape}")
    if (grid < 0).any():
        raise ValueError("PGM wants non-negative values")
    peak = grid.max()
    scaled = (np.rint(grid / peak * 255).astype(np.int64) if peak > 0
              else np.zeros_like(grid, dtype=np.int64))
    h, w = grid.shape
    lines = ["P2", f"{w} {h}", "255"]
    lines.extend(" ".join(str(v) for v in row) for row in scaled)
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_pgm(path) -> np.ndarray:
    with open(path, "r", encoding="ascii") as fh:
        tokens = fh.read().split()
    if not tokens or tokens[0] != "P2":
        raise ValueError(f"{path}: not a P2 PGM")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 255:
        raise ValueError(f"{path}: expected maxval 255, got {maxval}")
    cells = np.array([int(t) for t in tokens[4:]], dtype=np.int64)
    if cells.size != w * h:
        raise ValueError(f"{path}: expected {w * h} cells, found {cells.size}")
    return cells.reshape(h, w)
