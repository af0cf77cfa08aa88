"""Per-action activity of the first layer's readout neurons over visited states."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..agents import LocalAgent
from ..envs import make_env
from ..linalg import SeededRng
from ..network import QReadout, ensemble_q, select_action
from .runner import load_agent

DEFAULT_TOP_K = 20


@dataclass
class ActivityTable:
    neurons: np.ndarray  # (K,) neuron ids, most active first
    rms: np.ndarray  # (K, n_actions) RMS of y over states, per action
    states: int
    config_digest: str
    seed: int

    def to_tsv(self) -> str:
        n_a = self.rms.shape[1]
        lines = [
            f"# config_digest={self.config_digest} seed={self.seed} states={self.states}",
            "neuron\t" + "\t".join(f"action{a}" for a in range(n_a)) + "\tmean",
        ]
        for i, row in zip(self.neurons, self.rms):
            lines.append(f"{i}\t" + "\t".join(f"{v:.6g}" for v in row) + f"\t{row.mean():.6g}")
        return "\n".join(lines) + "\n"


def layer0_readout(agent: LocalAgent, sweep_out) -> np.ndarray:
    """Layer-0 y for one state, as (n_actions, neurons per action)."""
    acts = sweep_out.acts[0]
    n_a = agent.config.n_actions
    return acts.y[0].reshape(n_a, -1)


def collect(agent: LocalAgent, env, states: int, seed: int, epsilon: float = 0.0) -> np.ndarray:
    """Roll the policy for ``states`` steps; returns layer-0 y of shape (states, n_actions, neurons)."""
    rng = SeededRng(seed)
    obs = env.reset(seed=seed)
    state = agent.initial_state()
    out = []
    for _ in range(states):
        sweep_out, _ = agent.net.act_sweep(state, obs)
        out.append(layer0_readout(agent, sweep_out))
        per_cell = np.stack([q[0] for q in sweep_out.q])
        action = select_action(QReadout(per_cell, ensemble_q(per_cell, agent.config.ensemble)), epsilon, rng)
        obs, _, done = env.step(action)
        state = [h[0] for h in sweep_out.hidden]
        if done:
            obs = env.reset()
            state = agent.initial_state()
    return np.stack(out)


def activity_table(y: np.ndarray, top_k: int = DEFAULT_TOP_K) -> tuple[np.ndarray, np.ndarray]:
    """Rank neurons by mean (over actions) RMS activation across states."""
    rms = np.sqrt(np.mean(y.astype(np.float64) ** 2, axis=0)).T  # (neurons, n_actions)
    if top_k > rms.shape[0]:
        raise ValueError(f"layer 0 has {rms.shape[0]} readout neurons per action; cannot report top {top_k}")
    score = rms.mean(axis=1)
    order = np.lexsort((np.arange(len(score)), -score))[:top_k]
    return order, rms[order]


def inspect_checkpoint(path: Path, states: int = 100, seed: int = 0, top_k: int = DEFAULT_TOP_K,
                       env_name: str | None = None, epsilon: float = 0.0) -> ActivityTable:
    config, agent, header = load_agent(path)
    if env_name is not None and env_name != config.env:
        raise ValueError(f"checkpoint was trained on {config.env!r}, not {env_name!r}")
    if not isinstance(agent, LocalAgent):
        raise ValueError("inspect needs a cell network checkpoint (AD or ARQ), not DQN")
    env = make_env(config.env, **config.env_options)
    y = collect(agent, env, states, seed, epsilon)
    neurons, rms = activity_table(y, top_k)
    return ActivityTable(neurons, rms, states, header["config_digest"], seed)
