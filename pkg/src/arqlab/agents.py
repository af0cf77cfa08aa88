"""Agents: the local cell network (AD / ARQ) and the backprop MLP DQN baseline.

Both expose the same small surface used by the training loop:
``initial_state``, ``act``, ``topdown_of``, ``update``, ``sync_target``,
``tensors`` and ``load_tensors``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import cells, linalg
from .learner import LearnerConfig, loss_and_grad, td_target
from .linalg import SeededRng
from .network import LocalNetwork, NetworkConfig, QReadout, Sweep, select_action
from .optim import make_optimizer
from .replay import Batch


@dataclass
class CellStepResult:
    loss: float
    grads: cells.CellGrads
    q_mean: float
    target_mean: float


class LocalAgent:
    """A stack of cells, each regressing its own Q onto its own TD target."""

    def __init__(self, net_config: NetworkConfig, learner: LearnerConfig, rng: SeededRng):
        self.config = net_config
        self.learner = learner
        self.net = LocalNetwork.init(net_config, rng)
        self.optimizers = [
            make_optimizer(learner.optimizer, learner.lr, owner=f"cell{l}") for l in range(net_config.n_layers)
        ]
        self._pool = ThreadPoolExecutor(learner.workers) if learner.workers > 1 else None

    @property
    def topdown_dims(self) -> tuple[int, ...]:
        return self.config.topdown_dims

    def initial_state(self):
        return self.net.reset_state()

    def topdown_of(self, state) -> list[np.ndarray]:
        return self.net.topdown_of(state)

    def q_values(self, state, obs) -> tuple[QReadout, list, list]:
        return self.net.act_forward(state, obs)

    def act(self, state, obs, epsilon: float, rng: SeededRng):
        """Returns (action, new_state, top-down snapshot used, QReadout)."""
        readout, new_state, snapshot = self.net.act_forward(state, obs)
        return select_action(readout, epsilon, rng), new_state, snapshot, readout

    def forward_batch(self, batch: Batch) -> tuple[Sweep, list[np.ndarray]]:
        """Online Q(s_t, a_t) per cell and each cell's TD target from its own target copy."""
        online = self.net.train_forward(batch.obs, batch.topdown, actions=batch.action)
        nxt = self.net.train_forward(batch.next_obs, batch.next_topdown, target=True)
        targets = [td_target(batch.reward, batch.done, q.max(axis=1), self.learner.gamma) for q in nxt.q]
        return online, targets

    def cell_step(self, layer: int, online: Sweep, targets: list[np.ndarray], apply: bool = True) -> CellStepResult:
        q = online.q[layer]
        loss, dq = loss_and_grad(q, targets[layer])
        params = self.net.online[layer]
        grads = cells.backward(params, self.config.cell_config(layer), online.acts[layer], dq)
        if apply:
            self.optimizers[layer].step(params.items(), grads.items())
        return CellStepResult(loss, grads, float(np.mean(q)), float(np.mean(targets[layer])))

    def compute_grads(self, batch: Batch) -> list[CellStepResult]:
        online, targets = self.forward_batch(batch)
        return [self.cell_step(l, online, targets, apply=False) for l in range(self.config.n_layers)]

    def update(self, batch: Batch) -> dict:
        online, targets = self.forward_batch(batch)
        # The sweep above is the barrier; cells share nothing from here on.
        layers = range(self.config.n_layers)
        if self._pool is not None:
            results = list(self._pool.map(lambda l: self.cell_step(l, online, targets), layers))
        else:
            results = [self.cell_step(l, online, targets) for l in layers]
        return {
            "loss": [r.loss for r in results],
            "q_mean": [r.q_mean for r in results],
            "target_mean": [r.target_mean for r in results],
        }

    def sync_target(self) -> None:
        self.net.sync_target()

    def tensors(self):
        return self.net.tensors()

    def load_tensors(self, tensors) -> None:
        self.net.load_tensors(tensors)

    def param_count(self) -> int:
        return self.config.param_count()


# ------------------------------------------------------------------ DQN MLP


def mlp_init(dims: list[int], rng: SeededRng) -> list[tuple[str, np.ndarray]]:
    params = []
    for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        params.append((f"W{i}", linalg.init_weights(rng, fan_out, fan_in)))
        params.append((f"b{i}", linalg.zeros(fan_out)))
    return params


def mlp_forward(params: list[tuple[str, np.ndarray]], X: np.ndarray):
    """ReLU MLP with a linear output layer. Returns (Q, cache of layer inputs and pre-activations)."""
    n_layers = len(params) // 2
    a = X
    cache = []
    for i in range(n_layers):
        W, b = params[2 * i][1], params[2 * i + 1][1]
        z = a @ W.T + b
        cache.append((a, z))
        a = np.maximum(z, 0) if i < n_layers - 1 else z
    return a, cache


def mlp_backward(params, cache, dout: np.ndarray) -> list[tuple[str, np.ndarray]]:
    """Full backpropagation through every layer."""
    n_layers = len(params) // 2
    grads = [None] * len(params)
    d = dout
    for i in reversed(range(n_layers)):
        a, z = cache[i]
        if i < n_layers - 1:
            d = d * (z > 0)
        grads[2 * i] = (params[2 * i][0], d.T @ a)
        grads[2 * i + 1] = (params[2 * i + 1][0], d.sum(axis=0))
        d = d @ params[2 * i][1]
    return grads


class DQNAgent:
    """3-hidden-layer fully connected Q network trained end to end."""

    topdown_dims: tuple[int, ...] = ()

    def __init__(self, obs_dim: int, n_actions: int, hidden_dims, learner: LearnerConfig, rng: SeededRng):
        self.dims = [obs_dim, *hidden_dims, n_actions]
        self.learner = learner
        self.online = mlp_init(self.dims, rng)
        self.target = [(n, a.copy()) for n, a in self.online]
        self.optimizer = make_optimizer(learner.optimizer, learner.lr, owner="dqn")

    def initial_state(self):
        return []

    def topdown_of(self, state) -> list[np.ndarray]:
        return []

    def q_values(self, state, obs) -> tuple[QReadout, list, list]:
        q = mlp_forward(self.online, np.asarray(obs, dtype=linalg.dtype())[None, :])[0][0]
        return QReadout(q[None, :], q), [], []

    def act(self, state, obs, epsilon: float, rng: SeededRng):
        readout, _, _ = self.q_values(state, obs)
        return select_action(readout, epsilon, rng), [], [], readout

    def compute_grads(self, batch: Batch):
        q_all, cache = mlp_forward(self.online, batch.obs)
        rows = np.arange(len(batch))
        q = q_all[rows, batch.action]
        next_q = mlp_forward(self.target, batch.next_obs)[0].max(axis=1)
        target = td_target(batch.reward, batch.done, next_q, self.learner.gamma)
        loss, dq = loss_and_grad(q, target)
        dout = np.zeros_like(q_all)
        dout[rows, batch.action] = dq
        return loss, mlp_backward(self.online, cache, dout), q, target

    def update(self, batch: Batch) -> dict:
        loss, grads, q, target = self.compute_grads(batch)
        self.optimizer.step(self.online, grads)
        return {"loss": [loss], "q_mean": [float(np.mean(q))], "target_mean": [float(np.mean(target))]}

    def sync_target(self) -> None:
        self.target = [(n, a.copy()) for n, a in self.online]

    def tensors(self):
        return [(f"online.{n}", a) for n, a in self.online] + [(f"target.{n}", a) for n, a in self.target]

    def load_tensors(self, tensors) -> None:
        dt = linalg.dtype()
        for prefix in ("online", "target"):
            stack = []
            for n, a in self.online:
                t = tensors[f"{prefix}.{n}"]
                if t.shape != a.shape:
                    raise ValueError(f"{prefix}.{n}: checkpoint shape {t.shape}, expected {a.shape}")
                stack.append((n, t.astype(dt)))
            setattr(self, prefix, stack)

    def param_count(self) -> int:
        return sum(a.size for _, a in self.online)
