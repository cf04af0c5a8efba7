"""Plain SGD with optional global-norm gradient clipping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, NumericError, UsageError


@dataclass(frozen=True)
class SgdConfig:
    learning_rate: float
    clip_threshold: float | None = None

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise DomainError("learning rate must be positive")
        if self.clip_threshold is not None and self.clip_threshold <= 0:
            raise DomainError("clip threshold must be positive when set")


def global_grad_norm(grads: dict) -> float:
    total = 0.0
    for g in grads.values():
        total += float(np.sum(np.asarray(g, dtype=np.float64) ** 2))
    return float(np.sqrt(total))


def optimizer_step(model, grads: dict, config: SgdConfig) -> float:
    """Apply one in-place SGD update; returns the pre-clip global gradient
    norm. Bumps the model's parameter version so older caches are refused."""
    tensors = model.tensors()
    if set(grads) != set(tensors):
        missing = sorted(set(tensors) - set(grads))
        extra = sorted(set(grads) - set(tensors))
        raise UsageError(f"gradient keys do not match tensors "
                         f"(missing {missing}, unexpected {extra})")
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in {name}")

    norm = global_grad_norm(grads)
    scale = 1.0
    if config.clip_threshold is not None and norm > config.clip_threshold:
        scale = config.clip_threshold / norm
    step = config.learning_rate * scale
    for name, arr in tensors.items():
        arr -= step * np.asarray(grads[name], dtype=np.float64).reshape(arr.shape)
    model.bump_version()
    return norm
