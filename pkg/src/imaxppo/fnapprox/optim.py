from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NonFiniteGradientError(FloatingPointError):
    pass


@dataclass
class Adam:
    """Adam with bias correction; weight decay is plain L2 added to the gradient."""

    shapes: list[tuple]
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-5
    weight_decay: float = 0.0
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        self.shapes = [tuple(s) for s in self.shapes]
        if not self.m:
            self.m = [np.zeros(s) for s in self.shapes]
            self.v = [np.zeros(s) for s in self.shapes]

    @classmethod
    def for_params(cls, params, **kw) -> Adam:
        return cls([p.shape for p in params], **kw)

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        """Update ``params`` in place. Rejects the whole step on any NaN/Inf gradient."""
        if len(params) != len(self.shapes) or len(grads) != len(self.shapes):
            raise ValueError("params/grads do not match the optimizer state")
        for k, g in enumerate(grads):
            if g.shape != self.shapes[k]:
                raise ValueError(f"grad {k}: shape {g.shape} != {self.shapes[k]}")
            if not np.isfinite(g).all():
                raise NonFiniteGradientError(f"non-finite gradient in tensor {k} (shape {g.shape}); update rejected")
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            if self.weight_decay:
                g = g + self.weight_decay * p
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def global_norm(grads) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))


def clip_global_norm(grads: list[np.ndarray], max_norm: float) -> tuple[list[np.ndarray], float]:
    """Scale all grads by max_norm/‖g‖ when the joint L2 norm exceeds max_norm."""
    norm = global_norm(grads)
    if norm > max_norm:
        scale = max_norm / norm
        return [g * scale for g in grads], norm
    return list(grads), norm
