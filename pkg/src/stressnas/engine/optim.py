"""Loss and optimizer: softmax cross-entropy, SGD with momentum and
weight decay under a cosine learning-rate schedule."""

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError


@dataclass(frozen=True)
class TrainConfig:
    seed: int
    epochs: int = 10
    batch_size: int = 64
    lr: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 5e-4

    def validate(self) -> None:
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")
        if self.lr <= 0:
            raise ConfigError("learning rate must be positive")


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean negative log-likelihood; returns (loss, grad wrt logits)."""
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() >= logits.shape[1]:
        raise ConfigError("label out of range for logits width")
    z = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    logp = z[np.arange(len(labels)), labels] - lse
    loss = -logp.mean()
    grad = softmax(logits)
    grad[np.arange(len(labels)), labels] -= 1.0
    return loss, grad / len(labels)


def cosine_lr(base_lr: float, epoch: int, epochs: int) -> float:
    """base_lr * 0.5 * (1 + cos(pi * epoch / epochs)); zero at the endpoint."""
    if epochs <= 0:
        return base_lr
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * epoch / epochs))


def init_velocity(params: dict) -> dict:
    return {
        node: {p: np.zeros_like(a) for p, a in d.items()}
        for node, d in params.items()
    }


def sgd_step(
    params: dict, grads: dict, velocity: dict, cfg: TrainConfig, epoch: int
) -> None:
    """v <- m*v + g + wd*theta; theta <- theta - lr(epoch)*v. In place."""
    lr = cosine_lr(cfg.lr, epoch, cfg.epochs)
    for node, d in params.items():
        for pname, theta in d.items():
            g = grads[node][pname] + cfg.weight_decay * theta
            v = velocity[node][pname]
            v *= cfg.momentum
            v += g
            theta -= lr * v
