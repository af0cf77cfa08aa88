"""Gradient-check batteries shared by the ``gradcheck`` command and the tests."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import cells, linalg
from .agents import LocalAgent, mlp_backward, mlp_forward
from .cells import CellConfig, CellKind, Conditioning, Goodness, relative_error
from .learner import LearnerConfig
from .linalg import SeededRng
from .network import NetworkConfig
from .replay import Batch

COMBOS = list(itertools.product(CellKind, Goodness, Conditioning))


def random_cell_config(rng: SeededRng, kind: CellKind, good: Goodness, cond: Conditioning) -> CellConfig:
    return CellConfig(
        obs_dim=int(rng.integers(2, 7)),
        below_dim=int(rng.integers(0, 6)),
        above_dim=int(rng.integers(0, 6)),
        n_actions=int(rng.integers(2, 5)),
        hidden_dim=int(rng.integers(4, 9)),
        readout_dim=int(rng.integers(2, 6)),
        goodness=good,
        conditioning=cond,
        cell_kind=kind,
    )


def cell_suite(n_configs: int = 20, seed: int = 0, tolerance: float = 1e-4, step: float = 1e-4):
    """Grad-check ``n_configs`` random cells for every (kind, goodness, conditioning)."""
    reports = []
    with linalg.precision(64):
        for i, (kind, good, cond) in enumerate(COMBOS):
            rng = SeededRng(seed * 1000 + i)
            for j in range(n_configs):
                config = random_cell_config(rng, kind, good, cond)
                reports.append(
                    cells.grad_check(
                        config,
                        int(rng.integers(0, 2**31)),
                        batch=int(rng.integers(1, 5)),
                        tolerance=tolerance,
                        step=step,
                        taken_actions=bool(j % 2),
                    )
                )
    return reports


@dataclass
class DQNCheckReport:
    seed: int
    dims: list[int]
    max_rel_error: dict[str, float]
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(v < self.tolerance for v in self.max_rel_error.values())


def dqn_grad_check(seed: int, tolerance: float = 1e-4, step: float = 1e-4, batch: int = 4) -> DQNCheckReport:
    """Backprop MLP gradients of sum(dLdQ * Q) against central differences."""
    with linalg.precision(64):
        rng = SeededRng(seed)
        dims = [int(rng.integers(3, 8)), *(int(d) for d in rng.integers(3, 8, size=3)), int(rng.integers(2, 5))]
        margin = 10 * step * np.sqrt(max(dims))
        for _ in range(1000):
            params = [(n, a * 2.0) for n, a in _mlp_params(dims, rng)]
            X = rng.normal(size=(batch, dims[0]))
            _, cache = mlp_forward(params, X)
            # keep every pre-activation away from the ReLU kink
            if all(np.min(np.abs(z)) > margin for _, z in cache[:-1]):
                break
        q, cache = mlp_forward(params, X)
        dq = rng.normal(size=q.shape)
        analytic = dict(mlp_backward(params, cache, dq))

        def loss() -> float:
            return float(np.sum(dq * mlp_forward(params, X)[0]))

        errors = {n: relative_error(analytic[n], cells.numeric_grad(loss, w, step)) for n, w in params}
    return DQNCheckReport(seed, dims, errors, tolerance)


def _mlp_params(dims, rng):
    from .agents import mlp_init

    params = mlp_init(dims, rng)
    # non-zero biases so their gradients are exercised at a generic point
    return [(n, a + rng.normal(size=a.shape, scale=0.1) if n.startswith("b") else a) for n, a in params]


@dataclass
class LocalityReport:
    seed: int
    max_rel_error: list[dict[str, float]]
    structure_ok: bool
    problems: list[str] = field(default_factory=list)
    tolerance: float = 1e-4

    @property
    def passed(self) -> bool:
        return self.structure_ok and all(v < self.tolerance for e in self.max_rel_error for v in e.values())


LOCALITY_STEP = 1e-4


def random_batch(config: NetworkConfig, rng: SeededRng, size: int) -> Batch:
    obs = rng.normal(size=(size, config.obs_dim))
    nxt = rng.normal(size=(size, config.obs_dim))
    return Batch(
        obs=obs,
        action=rng.integers(0, config.n_actions, size=size),
        reward=rng.uniform(0.0, 1.0, size=size),
        next_obs=nxt,
        done=(rng.random(size) < 0.25).astype(np.float64),
        topdown=[rng.normal(size=(size, d)) for d in config.topdown_dims],
        next_topdown=[rng.normal(size=(size, d)) for d in config.topdown_dims],
        indices=np.arange(size),
    )


def _conditioned_batch(agent: LocalAgent, rng: SeededRng, size: int, margin: float) -> Batch | None:
    """Random batch whose every row keeps every cell away from FD-hostile points."""
    net = agent.config
    rows = []
    for _ in range(100 * size):
        row = random_batch(net, rng, 1)
        online, _ = agent.forward_batch(row)
        if all(cells.well_conditioned(net.cell_config(l), a, margin) for l, a in enumerate(online.acts)):
            rows.append(row)
            if len(rows) == size:
                break
    else:
        return None
    return Batch(
        obs=np.concatenate([r.obs for r in rows]),
        action=np.concatenate([r.action for r in rows]),
        reward=np.concatenate([r.reward for r in rows]),
        next_obs=np.concatenate([r.next_obs for r in rows]),
        done=np.concatenate([r.done for r in rows]),
        topdown=[np.concatenate([r.topdown[l] for r in rows]) for l in range(len(net.topdown_dims))],
        next_topdown=[np.concatenate([r.next_topdown[l] for r in rows]) for l in range(len(net.topdown_dims))],
        indices=np.arange(size),
    )


def locality_check(
    seed: int,
    *,
    kind: CellKind = CellKind.ARQ,
    goodness: Goodness = Goodness.RMS,
    conditioning: Conditioning = Conditioning.INPUT,
    batch: int = 4,
    tolerance: float = 1e-4,
    step: float = LOCALITY_STEP,
) -> LocalityReport:
    """Each cell's gradient equals the FD gradient of its own TD loss with its input held fixed."""
    with linalg.precision(64):
        rng = SeededRng(seed)
        net = NetworkConfig(
            obs_dim=5,
            n_actions=3,
            hidden_dims=(6, 5, 5),
            readout_dims=(3, 3, 3) if kind is CellKind.ARQ else (1, 1, 1),
            cell_kind=kind,
            goodness=goodness,
            conditioning=conditioning,
        )
        for _ in range(50):
            agent = LocalAgent(net, LearnerConfig(batch_size=batch, learning_starts=0), rng)
            for p in agent.net.online:
                p.W_att1 *= 3.0
                p.W_att2 *= 3.0
            agent.sync_target()
            # Separate online from target so targets are not trivially tied to Q.
            for p in agent.net.online:
                for _, w in p.items():
                    w += rng.normal(size=w.shape, scale=0.1)
            data = _conditioned_batch(agent, rng, batch, margin=10 * step * 10)
            if data is not None:
                break
        else:
            raise RuntimeError("no well-conditioned locality point found")
        online, targets = agent.forward_batch(data)
        results = agent.compute_grads(data)

        problems = []
        if len(results) != net.n_layers:
            problems.append(f"{len(results)} gradient entries for {net.n_layers} cells")
        errors = []
        for l, res in enumerate(results):
            cfg = net.cell_config(l)
            params = agent.net.online[l]
            names = [n for n, _ in res.grads.items()]
            if names != ["W_h", "W_att1", "W_att2"]:
                problems.append(f"cell {l}: gradient entries {names}")
            for n, g in res.grads.items():
                if g.shape != getattr(params, n).shape:
                    problems.append(f"cell {l}: {n} gradient shape {g.shape} != parameter {getattr(params, n).shape}")
            X = online.acts[l].X.copy()
            target = targets[l].copy()

            def loss(params=params, cfg=cfg, X=X, target=target) -> float:
                q, _ = cells.forward(params, cfg, X, data.action)
                return float(np.mean((target - q) ** 2))

            errors.append({n: relative_error(getattr(res.grads, n), cells.numeric_grad(loss, w, step)) for n, w in params.items()})
    return LocalityReport(seed, errors, not problems, problems, tolerance)
