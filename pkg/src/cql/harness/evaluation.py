"""Average-precision evaluation with two-box IoU matching.

A prediction is (scene, category, score, human box, object box). Per
category, predictions are ranked by score (ties keep emission order, which
is scene then instance then category, so ranking is deterministic) and
matched greedily to the not-yet-matched ground-truth pairs of the same scene
and category. A match requires IoU strictly above the threshold on BOTH
boxes; among candidates the one with the largest min(IoU_h, IoU_o) wins.
AP integrates the precision envelope over all recall change points.

Categories with no ground truth anywhere have undefined AP and are reported
as absent (None), never as zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Prediction:
    scene: int
    category: int
    score: float
    human_box: np.ndarray
    object_box: np.ndarray


@dataclass
class EvalReport:
    per_category_ap: list                    # float | None per category
    mean_ap: float | None
    density_map: dict | None = None          # bucket label -> mAP, absent if empty
    density_baseline: dict | None = None     # same, for the comparison baseline
    density_ratios: dict | None = None       # bucket label -> float | None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "per_category_ap": self.per_category_ap,
            "mean_ap": self.mean_ap,
        }
        if self.density_map is not None:
            out["density"] = self.density_map
        if self.density_baseline is not None:
            out["density_baseline"] = self.density_baseline
        if self.density_ratios is not None:
            out["density_ratios"] = self.density_ratios
        out.update(self.extras)
        return out


def iou(a, b) -> float:
    """Intersection over union of two [x1, y1, x2, y2] boxes."""
    ix = min(a[2], b[2]) - max(a[0], b[0])
    iy = min(a[3], b[3]) - max(a[1], b[1])
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)


def collect_predictions(model, scenes) -> list[Prediction]:
    """Score every (instance, category) pair of every scene."""
    preds = []
    for i, scene in enumerate(scenes):
        scores = model.predict(scene)
        for record, row in zip(scene.instances, scores):
            for k, s in enumerate(row):
                preds.append(Prediction(i, k, float(s),
                                        record.human_box, record.object_box))
    return preds


def _average_precision(tp: np.ndarray, fp: np.ndarray, n_gt: int) -> float:
    if n_gt == 0:
        raise ValueError("AP undefined without ground truth")
    if tp.size == 0:
        return 0.0
    cum_tp = np.cumsum(tp)
    cum_fp = np.cumsum(fp)
    recall = cum_tp / n_gt
    precision = cum_tp / (cum_tp + cum_fp)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    prev = np.concatenate([[0.0], recall[:-1]])
    return float(((recall - prev) * envelope).sum())


def evaluate_ap(predictions: list, scenes: list, iou_thresh: float = 0.5,
                categories: int | None = None) -> EvalReport:
    k = categories if categories is not None else scenes[0].image_labels.size
    per_category: list = []
    for cat in range(k):
        targets = [(i, j) for i, scene in enumerate(scenes)
                   for j, rec in enumerate(scene.instances)
                   if rec.labels[cat] == 1.0]
        if not targets:
            per_category.append(None)
            continue
        by_scene: dict[int, list] = {}
        for i, j in targets:
            by_scene.setdefault(i, []).append(j)
        ranked = sorted((p for p in predictions if p.category == cat),
                        key=lambda p: -p.score)
        matched: set = set()
        tp = np.zeros(len(ranked))
        fp = np.zeros(len(ranked))
        for r, pred in enumerate(ranked):
            best, best_j = iou_thresh, None
            for j in by_scene.get(pred.scene, ()):
                if (pred.scene, j) in matched:
                    continue
                rec = scenes[pred.scene].instances[j]
                overlap = min(iou(pred.human_box, rec.human_box),
                              iou(pred.object_box, rec.object_box))
                if overlap > best:
                    best, best_j = overlap, j
            if best_j is None:
                fp[r] = 1.0
            else:
                tp[r] = 1.0
                matched.add((pred.scene, best_j))
        per_category.append(_average_precision(tp, fp, len(targets)))

    defined = [ap for ap in per_category if ap is not None]
    mean_ap = float(np.mean(defined)) if defined else None
    return EvalReport(per_category_ap=per_category, mean_ap=mean_ap)
