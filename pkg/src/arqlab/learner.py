"""TD learning: exploration schedule, bootstrap targets, losses and the train step."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .linalg import SeededRng
from .replay import ReplayBuffer

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LearnerConfig:
    gamma: float = 0.99
    batch_size: int = 512
    learning_starts: int = 50_000
    train_frequency: int = 1
    target_sync_interval: int = 1_000
    buffer_capacity: int = 100_000
    lr: float = 1e-4
    optimizer: str = "adam"
    reward_clip: bool = False
    workers: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")
        for name in ("batch_size", "train_frequency", "target_sync_interval", "buffer_capacity"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.learning_starts < 0:
            raise ValueError("learning_starts must be >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError("optimizer must be 'adam' or 'sgd'")


@dataclass(frozen=True)
class EpsilonSchedule:
    start: float = 1.0
    end: float = 0.01
    exploration_fraction: float = 0.1
    total_steps: int = 4_000_000


def epsilon_at(schedule: EpsilonSchedule, step: int) -> float:
    """Linear from ``start`` at step 0 to ``end`` at exploration_fraction * total_steps, then flat."""
    if step < 0:
        raise ValueError("step must be >= 0")
    horizon = schedule.exploration_fraction * schedule.total_steps
    if horizon <= 0 or step >= horizon:
        return schedule.end
    return schedule.start + (schedule.end - schedule.start) * (step / horizon)


def td_target(reward, done, max_next_q, gamma: float):
    """r + gamma * max_a' Q_target(s', a'), with the bootstrap dropped on terminal steps."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must be in [0, 1)")
    reward = np.asarray(reward)
    not_done = 1.0 - np.asarray(done, dtype=reward.dtype if reward.dtype.kind == "f" else np.float64)
    return reward + gamma * not_done * np.asarray(max_next_q)


def loss_and_grad(q, target) -> tuple[float, np.ndarray]:
    """Batch-mean squared TD error and its gradient with respect to each Q."""
    q = np.asarray(q)
    err = np.asarray(target) - q
    n = err.size
    return float(np.mean(err * err)), (-2.0 * err / n).astype(q.dtype)


def train_step(agent, buffer: ReplayBuffer, step: int, config: LearnerConfig, rng: SeededRng) -> dict:
    """Sample a batch and run one update; a no-op (with a warning field) if preconditions fail."""
    if step < config.learning_starts:
        return {"skipped": f"step {step} < learning_starts {config.learning_starts}"}
    if len(buffer) < config.batch_size:
        return {"skipped": f"buffer size {len(buffer)} < batch_size {config.batch_size}"}
    batch = buffer.sample(config.batch_size, rng)
    if config.reward_clip:
        batch.reward = np.clip(batch.reward, -1, 1)
    return agent.update(batch)
