from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NORM_EPS = 1e-8


@dataclass
class RunningNorm:
    """Scalar running mean/variance, merged batch-wise (Chan et al. parallel update)."""

    mean: float = 0.0
    var: float = 1.0
    count: float = 0.0

    def update(self, batch) -> None:
        x = np.asarray(batch, dtype=np.float64).ravel()
        n = x.size
        if n == 0:
            return
        b_mean = float(x.mean())
        b_var = float(x.var())
        if self.count == 0:
            self.mean, self.var, self.count = b_mean, b_var, float(n)
            return
        total = self.count + n
        delta = b_mean - self.mean
        m2 = self.var * self.count + b_var * n + delta * delta * self.count * n / total
        self.mean += delta * n / total
        self.var = max(m2 / total, 0.0)
        self.count = total

    def normalize(self, x):
        return (np.asarray(x, dtype=np.float64) - self.mean) / np.sqrt(self.var + NORM_EPS)

    def denormalize(self, y):
        return np.asarray(y, dtype=np.float64) * np.sqrt(self.var + NORM_EPS) + self.mean

    def state(self) -> dict:
        return {"mean": self.mean, "var": self.var, "count": self.count}


def running_normalize(norm: RunningNorm, batch):
    norm.update(batch)
    return norm.normalize(batch)
