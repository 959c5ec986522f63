"""Finite-difference oracle for reverse-mode gradients.

Central differences in float64: truncation error O(h^2), roundoff O(eps/h),
so h = 1e-5 keeps both a few orders below the 1e-5 acceptance bound for
inputs of unit scale.
"""
from __future__ import annotations

import numpy as np

from .tensor import Tensor


def grad_check(f, x: Tensor, h: float = 1e-5) -> float:
    """Max relative error between backward grads of f and central differences.

    f maps one Tensor to a scalar Tensor; other inputs are closed over.
    Relative error per element is |a - n| / max(1, |a|, |n|) so near-zero
    gradients compare absolutely.
    """
    leaf = Tensor(x.data.copy(), requires_grad=True)
    f(leaf).backward()
    # a leaf outside the graph (e.g. behind a stop-gradient) has zero grad
    analytic = (leaf.grad.copy() if leaf.grad is not None
                else np.zeros_like(leaf.data))

    numeric = np.zeros_like(leaf.data)
    flat = numeric.reshape(-1)
    base = leaf.data.reshape(-1)
    for i in range(base.size):
        bumped = base.copy()
        bumped[i] = base[i] + h
        hi = f(Tensor(bumped.reshape(x.shape))).item()
        bumped[i] = base[i] - h
        lo = f(Tensor(bumped.reshape(x.shape))).item()
        flat[i] = (hi - lo) / (2.0 * h)

    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float((np.abs(analytic - numeric) / denom).max())
