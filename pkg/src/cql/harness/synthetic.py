"""Synthetic scene generation.

Each category gets a fixed unit prototype direction. An instance of category
k is that prototype plus Gaussian noise, with freshly sampled human/object
boxes in the unit square. Image tokens start as noise plus a per-cell
position signature (constant across scenes) and every instance deposits its
category prototype into the grid cell under its pair center, so the
image-level path sees pooled evidence from all instances at once and
cross-attention has something spatial to find.

Everything is a pure function of (spec, seed).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..cli.config import DENSITY_PROFILES
from ..decoder import FeatureGrid
from ..errors import InvalidSpec
from ..interaction import InstanceRecord
from ..numcore import Tensor

POSITION_SCALE = 0.1


@dataclass
class SyntheticScene:
    grid: FeatureGrid
    instances: list
    image_labels: np.ndarray  # (K,), OR over instance labels

    def __post_init__(self):
        if not self.instances:
            raise InvalidSpec("a scene needs at least one instance")
        stacked = np.stack([r.labels for r in self.instances])
        if not np.array_equal(self.image_labels, stacked.max(axis=0)):
            raise InvalidSpec("image labels must be the OR of instance labels")


@dataclass
class DatasetSpec:
    k: int
    d: int
    h: int
    w: int
    scenes: int
    min_instances: int = 1
    max_instances: int = 4
    noise_std: float = 0.01
    density_profile: str = "uniform"
    prototypes: np.ndarray | None = None

    def validate(self) -> None:
        counts = (self.k, self.d, self.h, self.w, self.scenes,
                  self.min_instances, self.max_instances)
        if any(c < 1 for c in counts):
            raise InvalidSpec(f"all counts must be >= 1: {self}")
        if self.min_instances > self.max_instances:
            raise InvalidSpec("instance range is empty")
        if self.noise_std < 0:
            raise InvalidSpec(f"noise_std must be >= 0, got {self.noise_std}")
        if self.density_profile not in DENSITY_PROFILES:
            raise InvalidSpec(
                f"density_profile must be one of {DENSITY_PROFILES}, "
                f"got {self.density_profile!r}")
        if self.prototypes is not None and self.prototypes.shape != (self.k, self.d):
            raise InvalidSpec(
                f"prototypes shape {self.prototypes.shape} != ({self.k}, {self.d})")


def unit_prototypes(rng: np.random.Generator, k: int, d: int) -> np.ndarray:
    protos = rng.standard_normal((k, d))
    return protos / np.linalg.norm(protos, axis=1, keepdims=True)


def _scene_categories(rng, spec: DatasetSpec, n: int) -> np.ndarray:
    if spec.density_profile == "uniform":
        return rng.integers(0, spec.k, size=n)
    if spec.density_profile == "sparse":
        # as distinct as the label set allows
        distinct = rng.permutation(spec.k)[:min(n, spec.k)]
        extra = rng.integers(0, spec.k, size=max(0, n - spec.k))
        return np.concatenate([distinct, extra])
    # dense: the scene repeats one or two categories
    m = 1 if spec.k == 1 or rng.random() < 0.5 else 2
    chosen = rng.choice(spec.k, size=m, replace=False)
    return rng.choice(chosen, size=n)


def _sample_box(rng) -> np.ndarray:
    x1, y1 = rng.uniform(0.0, 0.7, size=2)
    bw, bh = rng.uniform(0.1, 0.3, size=2)
    return np.array([x1, y1, x1 + bw, y1 + bh])


def _pair_cell(human_box, object_box, h: int, w: int) -> int:
    cx = (human_box[0] + human_box[2] + object_box[0] + object_box[2]) / 4.0
    cy = (human_box[1] + human_box[3] + object_box[1] + object_box[3]) / 4.0
    col = min(int(cx * w), w - 1)
    row = min(int(cy * h), h - 1)
    return row * w + col


def generate_dataset(spec: DatasetSpec, seed: int) -> list[SyntheticScene]:
    """Deterministic list of scenes; identical (spec, seed) give identical bytes."""
    spec.validate()
    rng = np.random.default_rng(seed)
    protos = (spec.prototypes if spec.prototypes is not None
              else unit_prototypes(rng, spec.k, spec.d))
    position = POSITION_SCALE * rng.standard_normal((spec.h * spec.w, spec.d))

    scenes = []
    for _ in range(spec.scenes):
        n = int(rng.integers(spec.min_instances, spec.max_instances + 1))
        cats = _scene_categories(rng, spec, n)
        tokens = position + spec.noise_std * rng.standard_normal(
            (spec.h * spec.w, spec.d))
        instances = []
        for cat in cats:
            labels = np.zeros(spec.k)
            labels[cat] = 1.0
            feature = protos[cat] + spec.noise_std * rng.standard_normal(spec.d)
            human_box = _sample_box(rng)
            object_box = _sample_box(rng)
            tokens[_pair_cell(human_box, object_box, spec.h, spec.w)] += protos[cat]
            instances.append(InstanceRecord(feature, human_box, object_box, labels))
        image_labels = np.stack([r.labels for r in instances]).max(axis=0)
        scenes.append(SyntheticScene(
            FeatureGrid(Tensor(tokens), spec.h, spec.w), instances, image_labels))
    return scenes


def snapshot_dataset(scenes: list[SyntheticScene]) -> dict:
    """Flatten scenes into named float64 arrays (container-format friendly)."""
    arrays: dict[str, np.ndarray] = {}
    for i, scene in enumerate(scenes):
        pre = f"scene{i}"
        arrays[f"{pre}.tokens"] = scene.grid.tokens.data
        arrays[f"{pre}.grid_hw"] = np.array(
            [scene.grid.height, scene.grid.width], dtype=np.float64)
        arrays[f"{pre}.features"] = np.stack([r.feature for r in scene.instances])
        arrays[f"{pre}.human_boxes"] = np.stack([r.human_box for r in scene.instances])
        arrays[f"{pre}.object_boxes"] = np.stack([r.object_box for r in scene.instances])
        arrays[f"{pre}.labels"] = np.stack([r.labels for r in scene.instances])
    return arrays


def restore_dataset(arrays: dict) -> list[SyntheticScene]:
    scenes = []
    for i in range(sum(1 for name in arrays if name.endswith(".tokens"))):
        pre = f"scene{i}"
        h, w = (int(v) for v in arrays[f"{pre}.grid_hw"])
        instances = [
            InstanceRecord(f, hb, ob, lab)
            for f, hb, ob, lab in zip(arrays[f"{pre}.features"],
                                      arrays[f"{pre}.human_boxes"],
                                      arrays[f"{pre}.object_boxes"],
                                      arrays[f"{pre}.labels"])
        ]
        labels = arrays[f"{pre}.labels"].max(axis=0)
        scenes.append(SyntheticScene(
            FeatureGrid(Tensor(arrays[f"{pre}.tokens"]), h, w), instances, labels))
    return scenes
