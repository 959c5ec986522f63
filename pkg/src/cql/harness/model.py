"""Model assembly: one parameter set, four wirings.

Every variant builds the identical full parameter set in the same order from
the same seed, so ablations differ only in which paths are active:

  a) static instance head alone (the baseline);
  b) a) plus the query bank, decoder and image-level classifier trained
     multi-task (instance scoring still static);
  c) instance scoring switched to cosine similarity against the refined
     queries (the adaptive-weight head);
  d) c) plus hard/soft score integration, applied in training and inference.

Projections feeding residual branches (attention output, second FFN layer)
start at zero, so an untrained decoder is exactly the identity on the
queries and training only has to move it away from the baseline, never
recover from a scrambled start.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..cli.config import RunConfig
from ..decoder import (
    AttentionMaps,
    CategoryQueryBank,
    DecoderLayerParams,
    FeatureGrid,
    FfnParams,
    MhaParams,
    decode,
    image_classify,
)
from ..interaction import (
    IntegrationConfig,
    ScoreBundle,
    combined_integration,
    cosine_scores,
    hard_integration,
    soft_integration,
    static_scores,
)
from ..losses import image_loss, instance_base_loss, total_loss
from ..numcore import Tensor
from .synthetic import SyntheticScene

INIT_STD = 0.02


@dataclass(frozen=True)
class VariantFlags:
    use_queries: bool
    use_cosine: bool
    use_integration: bool


VARIANTS = {
    "a": VariantFlags(False, False, False),
    "b": VariantFlags(True, False, False),
    "c": VariantFlags(True, True, False),
    "d": VariantFlags(True, True, True),
}


class Model:
    """Parameters plus forward paths for one run configuration."""

    def __init__(self, run: RunConfig, variant: VariantFlags | None = None):
        self.run = run
        self.variant = variant if variant is not None else default_variant(run)
        self.params: dict[str, Tensor] = {}
        rng = np.random.default_rng([run.seed, 1])  # stream separate from data

        def param(name: str, data) -> Tensor:
            t = Tensor(data, requires_grad=True)
            self.params[name] = t
            return t

        def normal(name, shape):
            return param(name, INIT_STD * rng.standard_normal(shape))

        k, d = run.k, run.d
        self.static_weight = normal("static.weight", (k, d))
        self.static_bias = param("static.bias", np.zeros(k))
        self.bank = CategoryQueryBank(normal("bank.queries", (k, d)))

        self.layers: list[DecoderLayerParams] = []
        for i in range(run.decoder.depth):
            layer = DecoderLayerParams()
            for letter in run.decoder.order:
                pre = f"decoder.l{i}.{letter}"
                layer.norms[letter] = (param(f"{pre}.ln_gain", np.ones(d)),
                                       param(f"{pre}.ln_bias", np.zeros(d)))
                if letter == "F":
                    hidden = run.decoder.ffn_hidden
                    layer.ffn = FfnParams(
                        normal(f"{pre}.w1", (d, hidden)),
                        param(f"{pre}.b1", np.zeros(hidden)),
                        param(f"{pre}.w2", np.zeros((hidden, d))),
                        param(f"{pre}.b2", np.zeros(d)))
                else:
                    attn = MhaParams(
                        run.decoder.heads,
                        normal(f"{pre}.wq", (d, d)), param(f"{pre}.bq", np.zeros(d)),
                        normal(f"{pre}.wk", (d, d)), param(f"{pre}.bk", np.zeros(d)),
                        normal(f"{pre}.wv", (d, d)), param(f"{pre}.bv", np.zeros(d)),
                        param(f"{pre}.wo", np.zeros((d, d))),
                        param(f"{pre}.bo", np.zeros(d)))
                    if letter == "C":
                        layer.cross = attn
                    else:
                        layer.self_attn = attn
            self.layers.append(layer)

        self.head_weight = normal("head.weight", (k, d))
        self.head_bias = param("head.bias", np.zeros(k))
        self.temperatures = param("integration.tau", np.ones(run.integration.kappa))

    # -- forward pieces ---------------------------------------------------

    def integration_cfg(self) -> IntegrationConfig:
        return IntegrationConfig(
            kappa=self.run.integration.kappa,
            temperatures=self.temperatures,
            use_hard=self.run.integration.use_hard,
            use_soft=self.run.integration.use_soft)

    def decode_image(self, grid: FeatureGrid) -> tuple[Tensor, AttentionMaps]:
        return decode(self.bank, grid, self.run.decoder, self.layers)

    def image_probs(self, refined: Tensor) -> Tensor:
        return image_classify(refined, self.head_weight, self.head_bias)

    @staticmethod
    def scene_features(scene: SyntheticScene) -> Tensor:
        return Tensor(np.stack([r.feature for r in scene.instances]))

    @staticmethod
    def scene_labels(scene: SyntheticScene) -> np.ndarray:
        return np.stack([r.labels for r in scene.instances])

    def score_scene(self, scene: SyntheticScene) -> ScoreBundle:
        """Full forward pass for one scene, differentiable throughout."""
        feats = self.scene_features(scene)
        refined = probs = None
        if self.variant.use_queries:
            refined, _ = self.decode_image(scene.grid)
            probs = self.image_probs(refined)
        if self.variant.use_cosine:
            scores = cosine_scores(refined, feats)
        else:
            scores = static_scores(self.static_weight, self.static_bias, feats)

        integrated = selected = None
        if self.variant.use_integration and probs is not None:
            cfg = self.integration_cfg()
            if cfg.use_hard:
                hard, selected = hard_integration(feats, refined, probs, cfg)
                integrated = (combined_integration(hard, selected, probs, cfg.kappa)
                              if cfg.use_soft else hard)
            elif cfg.use_soft:
                integrated = soft_integration(scores, probs)
        return ScoreBundle(probs, scores, integrated, selected)

    # -- training objective -------------------------------------------------

    def loss(self, scene: SyntheticScene) -> Tensor:
        bundle = self.score_scene(scene)
        labels = self.scene_labels(scene)
        if bundle.integrated_scores is not None:
            scores = bundle.integrated_scores
            if bundle.selected is not None:
                labels = labels[:, bundle.selected]
        else:
            scores = bundle.instance_scores
        base = instance_base_loss(scores, Tensor(labels),
                                  self.run.loss.instance_gamma)
        if not self.variant.use_queries:
            return base
        img = image_loss(bundle.image_probs, Tensor(scene.image_labels),
                         self.run.loss)
        return total_loss(base, img, self.run.loss.lam)

    # -- inference ----------------------------------------------------------

    def predict(self, scene: SyntheticScene) -> np.ndarray:
        """Final (N, K) evaluation scores; dropped categories score 0."""
        bundle = self.score_scene(scene)
        if bundle.integrated_scores is None:
            return bundle.instance_scores.data.copy()
        if bundle.selected is None:
            return bundle.integrated_scores.data.copy()
        n, k = bundle.instance_scores.shape
        out = np.zeros((n, k))
        out[:, bundle.selected] = bundle.integrated_scores.data
        return out

    def zero_grads(self) -> None:
        for t in self.params.values():
            t.grad = None


def default_variant(run: RunConfig) -> VariantFlags:
    """The full method, minus integration when both modes are switched off."""
    integrate = run.integration.use_hard or run.integration.use_soft
    return VariantFlags(True, True, integrate)


def build_model(run: RunConfig, variant: VariantFlags | None = None) -> Model:
    return Model(run, variant)
