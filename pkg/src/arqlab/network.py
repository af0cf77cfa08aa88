"""Stacks of local cells with skip and top-down temporal connections.

Layer ``l`` at time ``t`` sees ``concat(obs_t, h[l-1]_t, h[l+1]_{t-1})``: the
observation (skip connection), the layer below at the current step, and the
layer above from the previous step. The bottom layer has no input from below
and the top layer none from above.

When acting, the top-down inputs are taken from the running ``TemporalState``
and returned as a snapshot so the replay buffer can store them. When replaying,
the bottom-up part is recomputed with the current weights while the top-down
part comes from those stored snapshots.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import cells, linalg
from .cells import CellActivations, CellConfig, CellKind, CellParams, Conditioning, Goodness
from .linalg import SeededRng

TemporalState = list  # per-layer hidden vectors h^l from the previous step


class Ensemble(str, enum.Enum):
    MEAN = "mean"
    TOP = "top"


@dataclass(frozen=True)
class NetworkConfig:
    obs_dim: int
    n_actions: int
    hidden_dims: tuple[int, ...] = (400, 200, 200)
    readout_dims: tuple[int, ...] = (32, 32, 32)
    cell_kind: CellKind = CellKind.ARQ
    goodness: Goodness = Goodness.RMS
    conditioning: Conditioning = Conditioning.INPUT
    ensemble: Ensemble = Ensemble.MEAN

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(d) for d in self.hidden_dims))
        object.__setattr__(self, "readout_dims", tuple(int(d) for d in self.readout_dims))
        object.__setattr__(self, "cell_kind", CellKind(self.cell_kind))
        object.__setattr__(self, "goodness", Goodness(self.goodness))
        object.__setattr__(self, "conditioning", Conditioning(self.conditioning))
        object.__setattr__(self, "ensemble", Ensemble(self.ensemble))
        if not self.hidden_dims:
            raise ValueError("network needs at least one layer")
        if len(self.readout_dims) != len(self.hidden_dims):
            raise ValueError(
                f"readout_dims has {len(self.readout_dims)} entries for {len(self.hidden_dims)} layers"
            )

    @property
    def n_layers(self) -> int:
        return len(self.hidden_dims)

    @property
    def topdown_dims(self) -> tuple[int, ...]:
        """Sizes of the top-down inputs of layers 0..L-2 (the hidden sizes of layers 1..L-1)."""
        return self.hidden_dims[1:]

    def cell_config(self, layer: int) -> CellConfig:
        L = self.n_layers
        return CellConfig(
            obs_dim=self.obs_dim,
            below_dim=self.hidden_dims[layer - 1] if layer > 0 else 0,
            above_dim=self.hidden_dims[layer + 1] if layer < L - 1 else 0,
            n_actions=self.n_actions,
            hidden_dim=self.hidden_dims[layer],
            readout_dim=self.readout_dims[layer],
            goodness=self.goodness,
            conditioning=self.conditioning,
            cell_kind=self.cell_kind,
        )

    def cell_configs(self) -> list[CellConfig]:
        return [self.cell_config(l) for l in range(self.n_layers)]

    def param_count(self) -> int:
        return sum(c.param_count() for c in self.cell_configs())


@dataclass
class QReadout:
    per_cell: np.ndarray  # (n_layers, n_actions)
    ensemble: np.ndarray  # (n_actions,)


@dataclass
class Sweep:
    """Per-cell outputs of one bottom-up pass over a batch."""

    q: list[np.ndarray]
    acts: list[CellActivations] = field(default_factory=list)

    @property
    def hidden(self) -> list[np.ndarray]:
        return [a.h for a in self.acts]


def ensemble_q(per_cell: np.ndarray, mode: Ensemble) -> np.ndarray:
    """Combine per-cell Q along axis 0."""
    if Ensemble(mode) is Ensemble.TOP:
        return per_cell[-1]
    return per_cell.mean(axis=0)


def select_action(q, epsilon: float, rng: SeededRng) -> int:
    """Epsilon-greedy over the ensemble Q; ties go to the lowest index."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    values = q.ensemble if isinstance(q, QReadout) else np.asarray(q)
    if rng.random() < epsilon:
        return int(rng.integers(0, len(values)))
    return int(np.argmax(values))


def sweep(
    params: list[CellParams],
    config: NetworkConfig,
    obs: np.ndarray,
    topdown: list[np.ndarray],
    actions: np.ndarray | None = None,
) -> Sweep:
    """Bottom-up pass over a batch. ``topdown[l]`` feeds layer ``l`` (length L-1)."""
    obs = np.asarray(obs)
    if obs.ndim != 2 or obs.shape[1] != config.obs_dim:
        raise ValueError(f"observation batch shape {obs.shape} does not match (batch, {config.obs_dim})")
    if len(topdown) != config.n_layers - 1:
        raise ValueError(f"expected {config.n_layers - 1} top-down inputs, got {len(topdown)}")
    for l, (td, dim) in enumerate(zip(topdown, config.topdown_dims)):
        if np.shape(td) != (obs.shape[0], dim):
            raise ValueError(f"top-down snapshot {l} has shape {np.shape(td)}, expected ({obs.shape[0]}, {dim})")

    out = Sweep(q=[], acts=[])
    below = None
    for l, p in enumerate(params):
        parts = [obs]
        if below is not None:
            parts.append(below)
        if l < config.n_layers - 1:
            parts.append(topdown[l])
        X = np.concatenate(parts, axis=1)
        q, acts = cells.forward(p, config.cell_config(l), X, actions)
        out.q.append(q)
        out.acts.append(acts)
        below = acts.h
    return out


class LocalNetwork:
    """Online cells plus a frozen target copy."""

    def __init__(self, config: NetworkConfig, online: list[CellParams]):
        if len(online) != config.n_layers:
            raise ValueError("one CellParams per layer required")
        self.config = config
        self.online = online
        self.target = [p.copy() for p in online]

    @classmethod
    def init(cls, config: NetworkConfig, rng: SeededRng) -> "LocalNetwork":
        return cls(config, [CellParams.init(c, rng) for c in config.cell_configs()])

    def reset_state(self) -> TemporalState:
        return [linalg.zeros(d) for d in self.config.hidden_dims]

    def topdown_of(self, state: TemporalState) -> list[np.ndarray]:
        """Top-down inputs a step with this temporal state would use."""
        return [np.asarray(h) for h in state[1:]]

    def act_sweep(self, state: TemporalState, obs: np.ndarray) -> tuple[Sweep, list[np.ndarray]]:
        """Batch-of-one sweep over all action candidates, plus the top-down snapshot it used."""
        snapshot = self.topdown_of(state)
        dt = linalg.dtype()
        out = sweep(
            self.online,
            self.config,
            np.asarray(obs, dtype=dt)[None, :],
            [s.astype(dt)[None, :] for s in snapshot],
        )
        return out, snapshot

    def act_forward(self, state: TemporalState, obs: np.ndarray):
        """One acting step. Returns (QReadout, new TemporalState, top-down snapshot)."""
        out, snapshot = self.act_sweep(state, obs)
        per_cell = np.stack([q[0] for q in out.q])
        readout = QReadout(per_cell, ensemble_q(per_cell, self.config.ensemble))
        new_state = [h[0] for h in out.hidden]
        return readout, new_state, snapshot

    def train_forward(self, obs, topdown, actions=None, target: bool = False) -> Sweep:
        return sweep(self.target if target else self.online, self.config, obs, topdown, actions)

    def sync_target(self) -> None:
        self.target = [p.copy() for p in self.online]

    def tensors(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for prefix, stack in (("online", self.online), ("target", self.target)):
            for l, p in enumerate(stack):
                out.extend((f"{prefix}.{l}.{name}", a) for name, a in p.items())
        return out

    def load_tensors(self, tensors: dict[str, np.ndarray]) -> None:
        dt = linalg.dtype()
        for prefix in ("online", "target"):
            stack = []
            for l, cfg in enumerate(self.config.cell_configs()):
                arrays = {}
                for name, shape in cfg.param_shapes().items():
                    a = tensors[f"{prefix}.{l}.{name}"]
                    if a.shape != shape:
                        raise ValueError(f"{prefix}.{l}.{name}: checkpoint shape {a.shape}, expected {shape}")
                    arrays[name] = a.astype(dt)
                stack.append(CellParams(**arrays))
            setattr(self, prefix, stack)
