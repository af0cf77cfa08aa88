"""Per-parameter optimizers. Each cell gets its own instance so no state is shared."""

from __future__ import annotations

import numpy as np


class Adam:
    def __init__(self, lr: float = 1e-4, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8, owner: str = ""):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.owner = owner
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: list[tuple[str, np.ndarray]], grads: list[tuple[str, np.ndarray]]) -> None:
        """Update ``params`` in place."""
        _check_grads(params, grads, self.owner)
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for (name, p), (_, g) in zip(params, grads):
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            m_hat = m / bc1
            v_hat = v / bc2
            p -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.dtype)


class SGD:
    def __init__(self, lr: float = 1e-4, owner: str = ""):
        self.lr = lr
        self.owner = owner
        self.t = 0

    def step(self, params, grads) -> None:
        _check_grads(params, grads, self.owner)
        self.t += 1
        for (_, p), (_, g) in zip(params, grads):
            p -= (self.lr * g).astype(p.dtype)


def make_optimizer(kind: str, lr: float, owner: str = ""):
    if kind == "adam":
        return Adam(lr=lr, owner=owner)
    if kind == "sgd":
        return SGD(lr=lr, owner=owner)
    raise ValueError(f"unknown optimizer {kind!r}")


def _check_grads(params, grads, owner: str) -> None:
    if len(params) != len(grads):
        raise ValueError(f"{owner}: {len(params)} parameters but {len(grads)} gradients")
    for (name, p), (gname, g) in zip(params, grads):
        if name != gname or p.shape != g.shape:
            raise ValueError(f"{owner}: gradient {gname}{g.shape} does not match parameter {name}{p.shape}")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient in {owner or 'model'} parameter {name}")
