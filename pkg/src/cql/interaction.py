"""Instance-level interaction scoring and score integration.

Instance features are classified against the refined query bank by cosine
similarity (the adaptive-weight head) or against a static weight matrix (the
comparison baseline). Image-level probabilities can then sharpen instance
scores two ways: hard integration keeps only the top-kappa categories ranked
by image probability and rescores them with per-rank temperatures; soft
integration takes the geometric mean of instance score and image
probability. Both compose.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeMismatch, ZeroNorm
from .numcore import Tensor, activation, matmul


@dataclass
class InstanceRecord:
    """One human-object pair: feature, boxes, binary category labels."""

    feature: np.ndarray          # (D,)
    human_box: np.ndarray        # [x1, y1, x2, y2]
    object_box: np.ndarray       # [x1, y1, x2, y2]
    labels: np.ndarray           # (K,) in {0, 1}
    confidence: float = 1.0      # detection score; carried, not used in scoring

    def __post_init__(self):
        self.feature = np.asarray(self.feature, dtype=np.float64)
        self.human_box = np.asarray(self.human_box, dtype=np.float64)
        self.object_box = np.asarray(self.object_box, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.float64)
        for box in (self.human_box, self.object_box):
            if box.shape != (4,) or box[0] >= box[2] or box[1] >= box[3]:
                raise ValueError(f"degenerate box {box}")
        if not np.isin(self.labels, (0.0, 1.0)).all():
            raise ValueError("labels must be binary")


@dataclass
class ScoreBundle:
    """Image probabilities plus instance scores before/after integration.

    integrated_scores has one column per selected category when hard
    integration ran (selected lists those categories, best image probability
    first), otherwise full width.
    """

    image_probs: Tensor                    # (K,)
    instance_scores: Tensor                # (N, K)
    integrated_scores: Tensor | None = None
    selected: list | None = None


@dataclass
class IntegrationConfig:
    kappa: int
    temperatures: Tensor | None = None     # (kappa,), learnable, > 0
    use_hard: bool = True
    use_soft: bool = True


def _unit_rows(x: Tensor, what: str) -> Tensor:
    norms = (x * x).sum(axis=-1, keepdims=True).sqrt()
    if (norms.data == 0.0).any():
        raise ZeroNorm(f"zero-norm row in {what}")
    return x / norms


def _cosine_matrix(features: Tensor, refined: Tensor) -> Tensor:
    """cos(F_i, Q'_k) as (N, K); the single code path both heads share."""
    if features.ndim != 2 or refined.ndim != 2 or features.shape[1] != refined.shape[1]:
        raise ShapeMismatch(
            f"features {features.shape} vs queries {refined.shape}")
    return matmul(_unit_rows(features, "features"),
                  _unit_rows(refined, "queries").T)


def cosine_scores(refined: Tensor, features: Tensor) -> Tensor:
    """s_ik = sigmoid(cos(F_i, Q'_k)); scale-invariant in both arguments."""
    return activation(_cosine_matrix(features, refined), "sigmoid")


def static_scores(weights: Tensor, bias: Tensor, features: Tensor) -> Tensor:
    """Baseline head: sigmoid(F_i . W_k + b_k) with fixed weights."""
    if weights.ndim != 2 or features.ndim != 2 \
            or weights.shape[1] != features.shape[1] \
            or bias.shape != (weights.shape[0],):
        raise ShapeMismatch(
            f"weights {weights.shape}, bias {bias.shape}, "
            f"features {features.shape} disagree")
    return activation(matmul(features, weights.T) + bias, "sigmoid")


def _check_open_unit(t: Tensor, what: str) -> None:
    if (t.data <= 0).any() or (t.data >= 1).any():
        raise DomainError(f"{what} must lie strictly inside (0, 1)")


def soft_integration(s: Tensor, p: Tensor) -> Tensor:
    """Geometric mean sqrt(s_ik * p_k); keeps every category in play."""
    if s.ndim != 2 or p.shape != (s.shape[1],):
        raise ShapeMismatch(f"scores {s.shape} vs image probs {p.shape}")
    _check_open_unit(s, "instance scores")
    _check_open_unit(p, "image probabilities")
    return (s * p).sqrt()


def select_top_categories(p_values: np.ndarray, kappa: int) -> list:
    """Top-kappa categories by descending probability, ties by ascending index."""
    order = np.argsort(-p_values, kind="stable")
    return [int(i) for i in order[:kappa]]


def hard_integration(features: Tensor, refined: Tensor, p: Tensor,
                     cfg: IntegrationConfig) -> tuple[Tensor, list]:
    """Rescore the top-kappa categories with per-rank temperatures.

    Rank j scores sigmoid(cos(F_i, Q'_sel[j]) / tau_j). Selection reads only
    the values of p (stop-gradient); gradients flow through the selected
    cosine logits and the temperatures. Unselected categories are dropped
    and score 0 downstream.
    """
    k = refined.shape[0]
    if not 1 <= cfg.kappa <= k:
        raise ShapeMismatch(f"kappa {cfg.kappa} out of range for {k} categories")
    if p.shape != (k,):
        raise ShapeMismatch(f"image probs {p.shape} for {k} categories")
    tau = cfg.temperatures
    if tau is None or tau.shape != (cfg.kappa,):
        raise ShapeMismatch(
            f"need {cfg.kappa} temperatures, got "
            f"{None if tau is None else tau.shape}")
    if (tau.data <= 0).any():
        raise DomainError("temperatures must be positive")

    selected = select_top_categories(p.data, cfg.kappa)
    cos_sel = _cosine_matrix(features, refined).T.index_rows(selected).T
    return activation(cos_sel / tau, "sigmoid"), selected


def combined_integration(hard_scores: Tensor, selected: list, p: Tensor,
                         kappa: int) -> Tensor:
    """sqrt(hard score * image probability of the same selected category)."""
    if hard_scores.ndim != 2 or hard_scores.shape[1] != kappa \
            or len(selected) != kappa:
        raise ShapeMismatch(
            f"hard scores {hard_scores.shape} vs kappa {kappa} "
            f"({len(selected)} selected)")
    p_bar = p.index_rows(selected)
    return (hard_scores * p_bar).sqrt()
