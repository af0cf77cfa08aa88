"""Training and evaluation loops, metrics files and checkpoints."""

from __future__ import annotations

import json
import logging
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import checkpoint, linalg
from ..agents import DQNAgent, LocalAgent
from ..envs import make_env
from ..learner import epsilon_at, train_step
from ..linalg import SeededRng
from ..replay import ReplayBuffer, Transition
from .config import RunConfig, from_dict

log = logging.getLogger(__name__)

METRICS_VERSION = 1
SUMMARY_WINDOW = 100


@dataclass
class SeedStreams:
    """Independent random streams for one seed."""

    init: SeededRng
    explore: SeededRng
    replay: SeededRng
    env_seed: int

    @classmethod
    def from_seed(cls, seed: int) -> "SeedStreams":
        init, explore, replay, env = SeededRng(seed).spawn(4)
        return cls(init, explore, replay, int(env.integers(0, 2**31 - 1)))


def build_agent(config: RunConfig, env, rng: SeededRng):
    spec = env.spec
    learner = config.learner_config()
    if config.agent.kind == "dqn":
        return DQNAgent(spec.obs_dim, spec.n_actions, config.agent.hidden_dims, learner, rng)
    return LocalAgent(config.network_config(spec.obs_dim, spec.n_actions), learner, rng)


class MetricsWriter:
    """JSON-lines metrics: a header line, then one record per event."""

    def __init__(self, path: Path, header: dict):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._f = open(self.path, "w")
        self.write({"type": "header", "metrics_version": METRICS_VERSION, **header})

    def write(self, record: dict) -> None:
        self._f.write(json.dumps(record, sort_keys=True) + "\n")
        self._f.flush()

    def close(self) -> None:
        self._f.close()


def read_metrics(path: Path) -> tuple[dict, list[dict]]:
    lines = [json.loads(l) for l in Path(path).read_text().splitlines() if l.strip()]
    if not lines or lines[0].get("type") != "header":
        raise ValueError(f"{path}: missing metrics header")
    return lines[0], lines[1:]


@dataclass
class _LossWindow:
    sums: list = field(default_factory=list)
    count: int = 0

    def add(self, losses: list[float]) -> None:
        if not self.sums:
            self.sums = [0.0] * len(losses)
        self.sums = [s + l for s, l in zip(self.sums, losses)]
        self.count += 1

    def drain(self) -> list[float] | None:
        if not self.count:
            return None
        out = [s / self.count for s in self.sums]
        self.sums, self.count = [], 0
        return out


def seed_dir(out_dir: Path, seed: int) -> Path:
    return Path(out_dir) / f"seed{seed}"


def save_checkpoint(path: Path, agent, config: RunConfig, step: int, seed: int) -> Path:
    return checkpoint.save(
        path,
        agent.tensors(),
        config_digest=config.digest(),
        precision=config.precision,
        config=config.resolved(),
        step=step,
        seed=seed,
    )


def train_seed(config: RunConfig, seed: int, out_dir: Path, progress=None) -> dict:
    """Train one seed; writes metrics.jsonl, checkpoints and summary.json under out_dir/seed<N>."""
    linalg.set_precision(config.precision)
    root = seed_dir(out_dir, seed)
    root.mkdir(parents=True, exist_ok=True)
    streams = SeedStreams.from_seed(seed)
    env = make_env(config.env, **config.env_options)
    agent = build_agent(config, env, streams.init)
    learner = config.learner_config()
    schedule = config.epsilon_schedule()
    buffer = ReplayBuffer(learner.buffer_capacity, env.spec.obs_dim, agent.topdown_dims, obs_dtype=env.spec.obs_dtype)
    metrics = MetricsWriter(
        root / "metrics.jsonl",
        {"config_digest": config.digest(), "seed": seed, "env": config.env, "agent": config.agent.kind},
    )

    start = time.perf_counter()
    obs = env.reset(seed=streams.env_seed)
    state = agent.initial_state()
    ep_return, ep_len, episode = 0.0, 0, 0
    recent = deque(maxlen=SUMMARY_WINDOW)
    episode_losses, train_losses = _LossWindow(), _LossWindow()
    train_steps = 0
    try:
        for step in range(config.total_steps):
            eps = epsilon_at(schedule, step)
            action, new_state, snapshot, _ = agent.act(state, obs, eps, streams.explore)
            next_obs, reward, done = env.step(action)
            buffer.push(Transition(obs, action, reward, next_obs, done, snapshot, agent.topdown_of(new_state)))
            ep_return += reward
            ep_len += 1

            if step >= learner.learning_starts and step % learner.train_frequency == 0:
                out = train_step(agent, buffer, step, learner, streams.replay)
                if "loss" in out:
                    train_steps += 1
                    episode_losses.add(out["loss"])
                    train_losses.add(out["loss"])
                    if train_steps % config.metrics_interval == 0:
                        metrics.write({
                            "type": "train",
                            "step": step + 1,
                            "train_steps": train_steps,
                            "loss": train_losses.drain(),
                            "q_mean": out["q_mean"],
                            "target_mean": out["target_mean"],
                            "wall_time": time.perf_counter() - start,
                        })
            if (step + 1) % learner.target_sync_interval == 0:
                agent.sync_target()

            if done:
                episode += 1
                recent.append(ep_return)
                metrics.write({
                    "type": "episode",
                    "step": step + 1,
                    "episode": episode,
                    "return": ep_return,
                    "length": ep_len,
                    "epsilon": eps,
                    "loss": episode_losses.drain(),
                    "wall_time": time.perf_counter() - start,
                })
                if progress is not None:
                    progress(seed, step + 1, episode, ep_return)
                obs = env.reset()
                state = agent.initial_state()
                ep_return, ep_len = 0.0, 0
            else:
                obs, state = next_obs, new_state

            if config.checkpoint_interval and (step + 1) % config.checkpoint_interval == 0:
                save_checkpoint(root / f"step{step + 1}.ckpt", agent, config, step + 1, seed)
    finally:
        metrics.close()

    final = save_checkpoint(root / "final.ckpt", agent, config, config.total_steps, seed)
    summary = {
        "seed": seed,
        "config_digest": config.digest(),
        "steps": config.total_steps,
        "episodes": episode,
        "train_steps": train_steps,
        "final_return_mean": float(np.mean(recent)) if recent else None,
        "final_return_window": len(recent),
        "wall_time": time.perf_counter() - start,
        "checkpoint": str(final),
    }
    (root / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def aggregate(summaries: list[dict]) -> dict:
    """Mean and population std of the per-seed final returns."""
    values = [s["final_return_mean"] for s in summaries if s["final_return_mean"] is not None]
    return {
        "seeds": [s["seed"] for s in summaries],
        "per_seed": values,
        "mean": float(np.mean(values)) if values else None,
        "std": float(np.std(values)) if values else None,
    }


def train(config: RunConfig, out_dir: Path | None = None, progress=None) -> dict:
    out_dir = Path(out_dir or config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(json.dumps(config.resolved(), indent=2, sort_keys=True) + "\n")
    summaries = [train_seed(config, seed, out_dir, progress) for seed in config.seeds]
    result = {"config_digest": config.digest(), "name": config.name, **aggregate(summaries)}
    (out_dir / "summary.json").write_text(json.dumps(result, indent=2) + "\n")
    return result


def load_agent(path: Path, expected_digest: str | None = None):
    """Rebuild an agent from a checkpoint. Returns (config, agent, header)."""
    header = checkpoint.read_header(path)
    config = from_dict(header["config"])
    if config.digest() != header["config_digest"]:
        raise checkpoint.CheckpointError(f"{path}: embedded config does not match its digest")
    if expected_digest is not None and expected_digest != header["config_digest"]:
        raise checkpoint.CheckpointError(
            f"{path}: config digest {header['config_digest']} does not match expected {expected_digest}"
        )
    linalg.set_precision(config.precision)
    env = make_env(config.env, **config.env_options)
    agent = build_agent(config, env, SeededRng(0))
    _, tensors = checkpoint.load(path)
    agent.load_tensors(tensors)
    return config, agent, header


def evaluate(agent, env, episodes: int, seed: int, epsilon: float = 0.0) -> dict:
    rng = SeededRng(seed)
    returns = []
    obs = env.reset(seed=seed)
    for _ in range(episodes):
        state = agent.initial_state()
        total, done = 0.0, False
        while not done:
            action, state, _, _ = agent.act(state, obs, epsilon, rng)
            obs, r, done = env.step(action)
            total += r
        returns.append(total)
        obs = env.reset()
    a = np.asarray(returns)
    return {
        "episodes": episodes,
        "mean": float(a.mean()),
        "std": float(a.std()),
        "min": float(a.min()),
        "max": float(a.max()),
        "returns": [float(x) for x in a],
    }
