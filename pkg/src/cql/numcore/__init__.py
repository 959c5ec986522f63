"""Minimal reverse-mode tensor engine (float64) and its gradient oracle."""
from .gradcheck import grad_check
from .tensor import (
    Parameter,
    Tensor,
    activation,
    backward,
    concat,
    layer_norm,
    linear,
    matmul,
    softmax,
)

__all__ = [
    "Tensor",
    "Parameter",
    "matmul",
    "activation",
    "softmax",
    "layer_norm",
    "linear",
    "concat",
    "backward",
    "grad_check",
]
