"""Multi-label classification losses and the combined training objective.

The image-level loss (focal or asymmetric) supervises the refined-query
classifier; the instance-level focal loss stands in for a detection
baseline's classification loss. Both are nonnegative means of per-entry
terms; the asymmetric variant additionally shifts negatives by a margin m
so easy negatives inside the margin contribute nothing, gradient included.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeMismatch
from .numcore import Tensor


@dataclass
class LossConfig:
    kind: str = "asl"
    gamma_pos: float = 0.0
    gamma_neg: float = 4.0
    margin: float = 0.05
    lam: float = 1.0
    instance_gamma: float = 2.0

    def validate(self) -> None:
        if self.kind not in ("focal", "asl"):
            raise ValueError(f"loss kind must be focal or asl, got {self.kind!r}")
        if self.gamma_pos < 0 or self.gamma_neg < 0:
            raise ValueError("focusing exponents must be >= 0")
        if not 0.0 <= self.margin < 1.0:
            raise ValueError(f"margin must be in [0, 1), got {self.margin}")
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")


def _check_inputs(p: Tensor, y: Tensor) -> None:
    if p.shape != y.shape:
        raise ShapeMismatch(f"probabilities {p.shape} vs labels {y.shape}")
    if (p.data <= 0).any() or (p.data >= 1).any():
        raise DomainError("probabilities must lie strictly inside (0, 1)")
    if not np.isin(y.data, (0.0, 1.0)).all():
        raise DomainError("labels must be binary")


def focal_loss(p: Tensor, y: Tensor, gamma: float) -> Tensor:
    """Mean over entries of -(1-p)^g log p on positives, -p^g log(1-p) on negatives."""
    _check_inputs(p, y)
    pos = -((1.0 - p).pow(gamma) * p.log())
    neg = -(p.pow(gamma) * (1.0 - p).log())
    return (y * pos + (1.0 - y) * neg).mean()


def asymmetric_loss(p: Tensor, y: Tensor, cfg: LossConfig) -> Tensor:
    """Focal-style loss with separate exponents and a negative margin clamp.

    Negatives are scored on p' = max(p - m, 0): a negative already below the
    margin contributes exactly zero, including its gradient.
    """
    _check_inputs(p, y)
    pos = -((1.0 - p).pow(cfg.gamma_pos) * p.log())
    shifted = (p - cfg.margin).relu()
    neg = -(shifted.pow(cfg.gamma_neg) * (1.0 - shifted).log())
    return (y * pos + (1.0 - y) * neg).mean()


def image_loss(p: Tensor, y: Tensor, cfg: LossConfig) -> Tensor:
    """The configured image-level loss."""
    if cfg.kind == "focal":
        # one shared exponent; reuse the negative-branch gamma
        return focal_loss(p, y, cfg.gamma_neg)
    return asymmetric_loss(p, y, cfg)


def instance_base_loss(s: Tensor, labels: Tensor, gamma: float) -> Tensor:
    """Focal loss averaged over all N*K instance-category entries."""
    if s.shape != labels.shape:
        raise ShapeMismatch(f"scores {s.shape} vs labels {labels.shape}")
    return focal_loss(s, labels, gamma)


def total_loss(base: Tensor, img: Tensor, lam: float) -> Tensor:
    """base + lam * img."""
    return base + img * lam
