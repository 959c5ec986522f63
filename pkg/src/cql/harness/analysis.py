"""Density-partition analysis and the component ablation runner.

Interaction density of category k in an image is the number of its
ground-truth instances there. For each bucket n in {1..5, >5} the AP of
category k is re-evaluated on just the images whose count falls in that
bucket; a bucket nobody populates is reported as absent, never as zero.
Comparing two models yields per-bucket relative improvement ratios
(mAP_model - mAP_baseline) / mAP_baseline.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..cli.config import RunConfig
from .evaluation import EvalReport, collect_predictions, evaluate_ap
from .model import VARIANTS, Model
from .training import train

BUCKETS = ("1", "2", "3", "4", "5", ">5")


def bucket_label(count: int) -> str:
    return str(count) if count <= 5 else ">5"


def category_counts(scenes) -> np.ndarray:
    """(scene, category) ground-truth instance counts."""
    k = scenes[0].image_labels.size
    counts = np.zeros((len(scenes), k), dtype=np.int64)
    for i, scene in enumerate(scenes):
        for rec in scene.instances:
            counts[i] += rec.labels.astype(np.int64)
    return counts


def bucket_members(scenes) -> dict:
    """bucket label -> {category -> sorted scene indices}; empty buckets absent."""
    counts = category_counts(scenes)
    members: dict = {}
    for i, row in enumerate(counts):
        for cat, c in enumerate(row):
            if c > 0:
                members.setdefault(bucket_label(int(c)), {}) \
                       .setdefault(cat, []).append(i)
    return members


def _bucket_map(predictions, scenes, members_of_bucket: dict) -> float:
    aps = []
    for cat, scene_ids in sorted(members_of_bucket.items()):
        keep = set(scene_ids)
        sub_scenes = [scenes[i] for i in sorted(keep)]
        renumber = {i: r for r, i in enumerate(sorted(keep))}
        sub_preds = [
            type(p)(renumber[p.scene], p.category, p.score,
                    p.human_box, p.object_box)
            for p in predictions if p.scene in keep and p.category == cat
        ]
        report = evaluate_ap(sub_preds, sub_scenes,
                             categories=scenes[0].image_labels.size)
        aps.append(report.per_category_ap[cat])
    return float(np.mean(aps))


def density_map(predictions, scenes) -> dict:
    """bucket label -> mAP over the categories populating that bucket."""
    members = bucket_members(scenes)
    return {b: _bucket_map(predictions, scenes, members[b])
            for b in BUCKETS if b in members}


def improvement_ratio(baseline: float, model: float):
    """Relative improvement; exactly 0.0 when equal, absent when undefined."""
    delta = model - baseline
    if delta == 0.0:
        return 0.0
    if baseline == 0.0:
        return None
    return delta / baseline


def density_partition_report(model_a: Model, model_b: Model,
                             data: list) -> EvalReport:
    """Per-bucket mAP for both models plus ratio curves (b relative to a)."""
    preds_a = collect_predictions(model_a, data)
    preds_b = collect_predictions(model_b, data)
    full_b = evaluate_ap(preds_b, data)
    buckets_a = density_map(preds_a, data)
    buckets_b = density_map(preds_b, data)
    ratios = {b: improvement_ratio(buckets_a[b], buckets_b[b]) for b in buckets_a}
    return EvalReport(
        per_category_ap=full_b.per_category_ap,
        mean_ap=full_b.mean_ap,
        density_map=buckets_b,
        density_baseline=buckets_a,
        density_ratios=ratios)


@dataclass
class ComparisonReport:
    reports: dict      # variant letter -> EvalReport
    models: dict       # variant letter -> Model
    curves: dict       # variant letter -> list of per-step losses


def compare_models(run: RunConfig, data: list) -> ComparisonReport:
    """Train and evaluate the four ablation variants on shared data and seed."""
    reports: dict = {}
    models: dict = {}
    curves: dict = {}
    for letter, flags in VARIANTS.items():
        model, curve = train(run, data, variant=flags)
        preds = collect_predictions(model, data)
        report = evaluate_ap(preds, data)
        report.density_map = density_map(preds, data)
        reports[letter] = report
        models[letter] = model
        curves[letter] = curve
    return ComparisonReport(reports, models, curves)
