from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Protocol

import numpy as np


@dataclass(frozen=True)
class EnvSpec:
    obs_dim: int
    n_actions: int
    reward_range: tuple[float, float] = (0.0, float("inf"))
    obs_dtype: type = np.float32


class Env(Protocol):
    spec: EnvSpec

    def reset(self, seed: int | None = None) -> np.ndarray: ...

    def step(self, action: int) -> tuple[np.ndarray, float, bool]: ...


MAX_BANG_BANG_DIM = 16


def bang_bang_actions(k: int) -> np.ndarray:
    """All 2**k vectors in {-1, +1}**k, lexicographic with -1 before +1."""
    if k < 1:
        raise ValueError("action dimensionality must be >= 1")
    if k > MAX_BANG_BANG_DIM:
        raise ValueError(f"bang-bang discretization of {k} dims would give 2**{k} actions")
    return np.array(list(itertools.product((-1.0, 1.0), repeat=k)))


def random_policy_baseline(env: Env, episodes: int, seed: int) -> tuple[float, float]:
    """Mean and population std of episode returns under uniform random actions."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    returns = []
    env.reset(seed=seed)
    for _ in range(episodes):
        total, done = 0.0, False
        while not done:
            _, r, done = env.step(int(rng.integers(env.spec.n_actions)))
            total += r
        returns.append(total)
        env.reset()
    return float(np.mean(returns)), float(np.std(returns))
