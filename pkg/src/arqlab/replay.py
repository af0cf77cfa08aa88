"""Uniform FIFO replay buffer.

Besides the usual (s, a, r, s', done) fields every record stores the top-down
activations used when acting: ``topdown`` are the inputs seen at time t and
``next_topdown`` those a step at t+1 would see. Networks without temporal
connections store an empty list.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .linalg import SeededRng


@dataclass
class Transition:
    obs: np.ndarray
    action: int
    reward: float
    next_obs: np.ndarray
    done: bool
    topdown: list = field(default_factory=list)
    next_topdown: list = field(default_factory=list)


@dataclass
class Batch:
    obs: np.ndarray
    action: np.ndarray
    reward: np.ndarray
    next_obs: np.ndarray
    done: np.ndarray
    topdown: list[np.ndarray]
    next_topdown: list[np.ndarray]
    indices: np.ndarray

    def __len__(self) -> int:
        return len(self.action)


class ReplayBuffer:
    def __init__(self, capacity: int, obs_dim: int, topdown_dims=(), obs_dtype=np.float32):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.obs_dim = int(obs_dim)
        self.topdown_dims = tuple(int(d) for d in topdown_dims)
        # Snapshots keep the run's precision so replayed inputs are bit-identical.
        snap = linalg.dtype()
        self._obs = np.zeros((capacity, obs_dim), dtype=obs_dtype)
        self._next_obs = np.zeros((capacity, obs_dim), dtype=obs_dtype)
        self._action = np.zeros(capacity, dtype=np.int64)
        self._reward = np.zeros(capacity, dtype=np.float64)
        self._done = np.zeros(capacity, dtype=bool)
        self._topdown = [np.zeros((capacity, d), dtype=snap) for d in self.topdown_dims]
        self._next_topdown = [np.zeros((capacity, d), dtype=snap) for d in self.topdown_dims]
        self._next = 0
        self._size = 0
        self.pushes = 0

    def __len__(self) -> int:
        return self._size

    def push(self, t: Transition) -> None:
        if len(t.topdown) != len(self.topdown_dims) or len(t.next_topdown) != len(self.topdown_dims):
            raise ValueError(
                f"transition carries {len(t.topdown)}/{len(t.next_topdown)} snapshots, "
                f"buffer expects {len(self.topdown_dims)}"
            )
        i = self._next
        self._obs[i] = t.obs
        self._next_obs[i] = t.next_obs
        self._action[i] = t.action
        self._reward[i] = t.reward
        self._done[i] = t.done
        for store, snap, dim in zip(self._topdown, t.topdown, self.topdown_dims):
            if np.shape(snap) != (dim,):
                raise ValueError(f"snapshot shape {np.shape(snap)} != ({dim},)")
            store[i] = snap
        for store, snap in zip(self._next_topdown, t.next_topdown):
            store[i] = snap
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)
        self.pushes += 1

    def sample(self, batch_size: int, rng: SeededRng) -> Batch:
        """Uniform sampling with replacement."""
        if self._size == 0:
            raise ValueError("cannot sample from an empty buffer")
        return self.get(rng.integers(0, self._size, size=batch_size))

    def get(self, indices) -> Batch:
        idx = np.asarray(indices, dtype=np.int64)
        dt = linalg.dtype()
        return Batch(
            obs=self._obs[idx].astype(dt),
            action=self._action[idx],
            reward=self._reward[idx].astype(dt),
            next_obs=self._next_obs[idx].astype(dt),
            done=self._done[idx],
            topdown=[s[idx] for s in self._topdown],
            next_topdown=[s[idx] for s in self._next_topdown],
            indices=idx,
        )

    def oldest_first(self) -> np.ndarray:
        """Slot indices ordered from oldest to newest stored transition."""
        if self._size < self.capacity:
            return np.arange(self._size)
        return (np.arange(self.capacity) + self._next) % self.capacity
