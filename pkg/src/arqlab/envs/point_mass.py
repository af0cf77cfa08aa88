"""Continuous point mass in a box, controlled through bang-bang actions.

The agent picks one of the 2**k sign vectors from ``bang_bang_actions(k)`` as
the force. Dynamics are semi-implicit Euler::

    velocity += dt * force
    position += dt * velocity

Positions are clipped to the box [-1, 1]**k and the velocity component that
hit a wall is zeroed. The per-step reward is max(0, 1 - |position - target| / D)
with D the box diagonal, so rewards are always in [0, 1]. Observations are
``concat(position, velocity, target - position)``.
"""

from __future__ import annotations

import numpy as np

from .base import EnvSpec, bang_bang_actions


class PointMassEnv:
    name = "point_mass"

    def __init__(self, k: int = 2, dt: float = 0.05, horizon: int = 200):
        self.k = k
        self.dt = dt
        self.horizon = horizon
        self.forces = bang_bang_actions(k)
        self.diagonal = 2.0 * np.sqrt(k)
        self.spec = EnvSpec(obs_dim=3 * k, n_actions=len(self.forces), reward_range=(0.0, 1.0), obs_dtype=np.float32)
        self._rng = np.random.Generator(np.random.PCG64(0))
        self.done = True

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self._rng = np.random.Generator(np.random.PCG64(seed))
        self.position = self._rng.uniform(-0.8, 0.8, self.k)
        self.velocity = np.zeros(self.k)
        self.target = self._rng.uniform(-0.8, 0.8, self.k)
        self.t = 0
        self.done = False
        return self.observe()

    def observe(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity, self.target - self.position]).astype(np.float32)

    def reward(self) -> float:
        return max(0.0, 1.0 - float(np.linalg.norm(self.position - self.target)) / self.diagonal)

    def step(self, action: int) -> tuple[np.ndarray, float, bool]:
        if self.done:
            raise RuntimeError("step() called on a finished episode; call reset()")
        if not 0 <= action < self.spec.n_actions:
            raise ValueError(f"action {action} out of range for {self.spec.n_actions} actions")
        self.velocity = self.velocity + self.dt * self.forces[action]
        self.position = self.position + self.dt * self.velocity
        hit = np.abs(self.position) > 1.0
        self.position = np.clip(self.position, -1.0, 1.0)
        self.velocity[hit] = 0.0
        self.t += 1
        self.done = self.t >= self.horizon
        return self.observe(), self.reward(), self.done
