"""Minimal deterministic neural-network engine.

Float64 arrays, a DAG of layer nodes with exact reverse-mode gradients for
both parameters and inputs, softmax cross-entropy, and SGD with momentum
and a cosine schedule. Small enough to audit, fast enough for desk-scale
training on CPU.
"""

from .layers import (
    Add,
    AvgPool,
    BatchNorm,
    Concat,
    Conv2D,
    Dense,
    GlobalAvgPool,
    ReLU,
    Softmax,
    Zeroize,
)
from .network import ForwardContext, Network
from .optim import TrainConfig, cosine_lr, cross_entropy, sgd_step, softmax

__all__ = [
    "Add", "AvgPool", "BatchNorm", "Concat", "Conv2D", "Dense",
    "GlobalAvgPool", "ReLU", "Softmax", "Zeroize",
    "ForwardContext", "Network",
    "TrainConfig", "cosine_lr", "cross_entropy", "sgd_step", "softmax",
]
