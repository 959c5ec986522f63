"""Deterministic single-scene-per-step training with Adam."""
from __future__ import annotations

import numpy as np

from ..cli.config import RunConfig
from ..errors import DivergenceDetected, DomainError
from .model import Model, VariantFlags, build_model
from .synthetic import DatasetSpec, generate_dataset


def dataset_from_run(run: RunConfig) -> list:
    """The scenes a run trains and evaluates on, determined by run.seed."""
    spec = DatasetSpec(
        k=run.k, d=run.d, h=run.h, w=run.w,
        scenes=run.dataset.scenes,
        min_instances=run.dataset.min_instances,
        max_instances=run.dataset.max_instances,
        noise_std=run.dataset.noise_std,
        density_profile=run.dataset.density_profile)
    return generate_dataset(spec, run.seed)


class Adam:
    def __init__(self, params: dict, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in params.items()}

    def step(self) -> None:
        self.t += 1
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            m = self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            v = self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g
            m_hat = m / (1 - self.beta1 ** self.t)
            v_hat = v / (1 - self.beta2 ** self.t)
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def train(run: RunConfig, data: list, variant: VariantFlags | None = None,
          model: Model | None = None) -> tuple[Model, list[float]]:
    """Minimize the combined objective; returns the model and per-step losses.

    Scenes are visited in order, one per step, cycling. Zero steps leave the
    freshly built model untouched. A non-finite loss (or an op pushed out of
    its domain by a diverging update) raises DivergenceDetected.
    """
    if not data:
        raise ValueError("train needs at least one scene")
    if model is None:
        model = build_model(run, variant)
    opt = Adam(model.params, run.optimizer.lr)
    curve: list[float] = []
    for step in range(run.optimizer.steps):
        scene = data[step % len(data)]
        model.zero_grads()
        try:
            loss = model.loss(scene)
            value = loss.item()
            if not np.isfinite(value):
                raise DivergenceDetected(f"loss became {value} at step {step}")
            loss.backward()
        except DomainError as exc:
            raise DivergenceDetected(f"step {step}: {exc}") from exc
        opt.step()
        curve.append(value)
    return model, curve
