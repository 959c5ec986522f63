"""Category-query refinement decoder.

A bank of K learnable query embeddings, one permanently bound to each
interaction category, is refined against the image's feature tokens by a
small stack of decoder layers (cross-attention, self-attention, FFN in a
configurable order). The refined bank drives two heads: a per-category
image-level classifier (row k of the bank meets only row k of the head) and
the adaptive cosine instance classifier in the interaction module.

Sublayers are pre-norm: q' = q + sublayer(layer_norm(q)). With output
projections initialized to zero the whole stack is therefore the identity on
the queries, which is both the documented starting point and a tested
contract.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IndexOutOfRange, ShapeMismatch
from .numcore import Tensor, activation, concat, layer_norm, linear, matmul, softmax

VALID_SUBLAYERS = "CSF"


@dataclass
class CategoryQueryBank:
    """The learnable K x D query matrix; row order is the category order."""

    queries: Tensor

    def __post_init__(self):
        if self.queries.ndim != 2 or min(self.queries.shape) < 1:
            raise ShapeMismatch(f"query bank must be K x D, got {self.queries.shape}")

    @property
    def K(self) -> int:
        return self.queries.shape[0]

    @property
    def D(self) -> int:
        return self.queries.shape[1]


@dataclass
class FeatureGrid:
    """Image features as H*W tokens of width D, row-major over the grid."""

    tokens: Tensor
    height: int
    width: int

    def __post_init__(self):
        if self.tokens.ndim != 2 or self.tokens.shape[0] != self.height * self.width:
            raise ShapeMismatch(
                f"token count {self.tokens.shape} does not match "
                f"{self.height}x{self.width} grid")


@dataclass
class DecoderConfig:
    depth: int = 2
    order: str = "CSF"
    heads: int = 4
    ffn_hidden: int = 64
    positional: bool = False

    def validate(self, d: int) -> None:
        if self.depth < 0:
            raise ValueError(f"depth must be >= 0, got {self.depth}")
        if not self.order or len(set(self.order)) != len(self.order) \
                or any(c not in VALID_SUBLAYERS for c in self.order):
            raise ValueError(
                f"order must be a non-empty sequence over {{C,S,F}} without "
                f"repetition, got {self.order!r}")
        if self.heads < 1 or d % self.heads != 0:
            raise ValueError(f"width {d} not divisible by heads {self.heads}")
        if "F" in self.order and self.ffn_hidden < 1:
            raise ValueError(f"ffn_hidden must be >= 1, got {self.ffn_hidden}")


@dataclass
class AttentionMaps:
    """Post-softmax cross-attention, per layer: (heads, K, H*W), detached."""

    maps: list
    height: int
    width: int

    def __len__(self) -> int:
        return len(self.maps)


@dataclass
class MhaParams:
    heads: int
    wq: Tensor
    bq: Tensor
    wk: Tensor
    bk: Tensor
    wv: Tensor
    bv: Tensor
    wo: Tensor
    bo: Tensor


@dataclass
class FfnParams:
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor


@dataclass
class DecoderLayerParams:
    cross: MhaParams | None = None
    self_attn: MhaParams | None = None
    ffn: FfnParams | None = None
    norms: dict = field(default_factory=dict)  # sublayer letter -> (gain, bias)


def mha(q: Tensor, kv: Tensor, p: MhaParams) -> tuple[Tensor, np.ndarray]:
    """Scaled dot-product attention of q rows over kv rows.

    Returns the output-projected result and the post-softmax attention
    stacked per head, (heads, n_q, n_kv), detached from the graph.
    """
    if q.ndim != 2 or kv.ndim != 2 or q.shape[1] != kv.shape[1]:
        raise ShapeMismatch(f"attention operands disagree: {q.shape} vs {kv.shape}")
    d = q.shape[1]
    if d % p.heads != 0:
        raise ShapeMismatch(f"width {d} not divisible by {p.heads} heads")
    if p.wq.shape != (d, d):
        raise ShapeMismatch(f"projection shape {p.wq.shape} does not match width {d}")
    dh = d // p.heads
    scale = 1.0 / np.sqrt(dh)

    qp = linear(q, p.wq, p.bq)
    kp = linear(kv, p.wk, p.bk)
    vp = linear(kv, p.wv, p.bv)

    outs = []
    attn_heads = []
    for h in range(p.heads):
        cols = slice(h * dh, (h + 1) * dh)
        logits = matmul(qp[:, cols], kp[:, cols].T) * scale
        attn = softmax(logits, axis=1)
        outs.append(matmul(attn, vp[:, cols]))
        attn_heads.append(attn.data)
    out = linear(concat(outs, axis=1), p.wo, p.bo)
    return out, np.stack(attn_heads)


def _ffn(x: Tensor, p: FfnParams) -> Tensor:
    return linear(activation(linear(x, p.w1, p.b1), "relu"), p.w2, p.b2)


def decoder_layer(q: Tensor, image: FeatureGrid, cfg: DecoderConfig,
                  params: DecoderLayerParams) -> tuple[Tensor, np.ndarray | None]:
    """One refinement layer; applies cfg.order sublayers with pre-norm residuals."""
    cross_attn = None
    for letter in cfg.order:
        gain, bias = params.norms[letter]
        normed = layer_norm(q, gain, bias)
        if letter == "C":
            sub, cross_attn = mha(normed, image.tokens, params.cross)
        elif letter == "S":
            sub, _ = mha(normed, normed, params.self_attn)
        else:
            sub = _ffn(normed, params.ffn)
        q = q + sub
    return q, cross_attn


def positional_table(height: int, width: int, d: int) -> np.ndarray:
    """Fixed sinusoidal position values for the token grid (optional)."""
    ys, xs = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    pos = np.zeros((height * width, d))
    coords = np.stack([ys.ravel(), xs.ravel()], axis=1).astype(np.float64)
    half = d // 2
    for j in range(half):
        freq = 1.0 / (100.0 ** (2 * (j // 2) / max(half, 1)))
        src = coords[:, 0] if j % 2 == 0 else coords[:, 1]
        pos[:, j] = np.sin(src * freq)
        pos[:, half + j] = np.cos(src * freq)
    return 0.1 * pos


def decode(bank: CategoryQueryBank, image: FeatureGrid, cfg: DecoderConfig,
           layers: list[DecoderLayerParams]) -> tuple[Tensor, AttentionMaps]:
    """Refine the full query bank against one image; depth 0 is the identity."""
    cfg.validate(bank.D)
    if len(layers) != cfg.depth:
        raise ShapeMismatch(
            f"{len(layers)} layer parameter sets for depth {cfg.depth}")
    if cfg.positional:
        image = FeatureGrid(
            image.tokens + Tensor(positional_table(image.height, image.width, bank.D)),
            image.height, image.width)
    q = bank.queries
    maps = []
    for params in layers:
        q, cross = decoder_layer(q, image, cfg, params)
        if cross is not None:
            maps.append(cross)
    return q, AttentionMaps(maps, image.height, image.width)


def image_classify(refined: Tensor, head_weight: Tensor, head_bias: Tensor) -> Tensor:
    """Per-category probabilities; category k sees only its own row pair."""
    if head_weight.shape != refined.shape or head_bias.shape != (refined.shape[0],):
        raise ShapeMismatch(
            f"head {head_weight.shape}/{head_bias.shape} does not match "
            f"bank {refined.shape}")
    logits = (refined * head_weight).sum(axis=1) + head_bias
    return activation(logits, "sigmoid")


def attention_heatmap(maps: AttentionMaps, layer: int, category: int) -> Tensor:
    """Head-averaged cross-attention of one category, reshaped to the grid."""
    if not 0 <= layer < len(maps.maps):
        raise IndexOutOfRange(f"layer {layer} out of range ({len(maps.maps)} maps)")
    stack = maps.maps[layer]
    if not 0 <= category < stack.shape[1]:
        raise IndexOutOfRange(f"category {category} out of range ({stack.shape[1]})")
    row = stack[:, category, :].mean(axis=0)
    return Tensor(row.reshape(maps.height, maps.width))
