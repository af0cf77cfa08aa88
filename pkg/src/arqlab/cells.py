"""Local learning cells.

A cell owns three matrices. ``W_h`` maps the cell input to its hidden state,
``W_att1`` and ``W_att2`` produce two vectors whose outer product (after tanh
and a row-wise layernorm) is used as a weight matrix over the hidden state::

    h  = layernorm(relu(W_h @ X))
    z1 = W_att1 @ X'        z2 = W_att2 @ X'
    M  = layernorm_rows(tanh(outer(z2, z1)))
    y  = M @ h

For AD cells ``y`` is read out directly as per-action Q-values. For ARQ cells
``y`` is reduced to a scalar by a goodness function (RMS by default). With
input conditioning ``X'`` is ``X`` with the candidate action appended as a
one-hot vector and the attention branch runs once per candidate; ``h`` never
sees the action. With output conditioning ``X' = X`` and the readout is split
per action.

Everything here is batched along the leading axis. The backward pass only
produces gradients for the cell's own matrices: the input ``X`` (which carries
other cells' activations) is a constant.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, fields
from typing import Callable

import numpy as np

from . import linalg
from .linalg import SeededRng, layernorm_backward, layernorm_forward


class CellKind(str, enum.Enum):
    AD = "ad"
    ARQ = "arq"


class Goodness(str, enum.Enum):
    RMS = "rms"
    MEAN = "mean"
    MS = "ms"
    VAR = "var"


class Conditioning(str, enum.Enum):
    INPUT = "input"
    OUTPUT = "output"


@dataclass(frozen=True)
class CellConfig:
    obs_dim: int
    below_dim: int
    above_dim: int
    n_actions: int
    hidden_dim: int
    readout_dim: int
    goodness: Goodness = Goodness.RMS
    conditioning: Conditioning = Conditioning.INPUT
    cell_kind: CellKind = CellKind.ARQ

    def __post_init__(self):
        object.__setattr__(self, "goodness", Goodness(self.goodness))
        object.__setattr__(self, "conditioning", Conditioning(self.conditioning))
        object.__setattr__(self, "cell_kind", CellKind(self.cell_kind))
        for name in ("obs_dim", "below_dim", "above_dim"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("n_actions", "hidden_dim", "readout_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.hidden_dim < 2:
            raise ValueError("hidden_dim must be >= 2 (layernorm)")
        if self.input_dim < 1:
            raise ValueError("cell input is empty")

    @property
    def input_dim(self) -> int:
        return self.obs_dim + self.below_dim + self.above_dim

    @property
    def attn_input_dim(self) -> int:
        if self.conditioning is Conditioning.INPUT:
            return self.input_dim + self.n_actions
        return self.input_dim

    @property
    def group_dim(self) -> int:
        """Length of the vector each Q-value is read from."""
        return 1 if self.cell_kind is CellKind.AD else self.readout_dim

    @property
    def attn_rows(self) -> int:
        """Rows of W_att2 (length of z2 for one branch)."""
        if self.conditioning is Conditioning.INPUT:
            return self.group_dim
        return self.n_actions * self.group_dim

    def param_shapes(self) -> dict[str, tuple[int, int]]:
        return {
            "W_h": (self.hidden_dim, self.input_dim),
            "W_att1": (self.hidden_dim, self.attn_input_dim),
            "W_att2": (self.attn_rows, self.attn_input_dim),
        }

    def param_count(self) -> int:
        return sum(r * c for r, c in self.param_shapes().values())


@dataclass
class CellParams:
    W_h: np.ndarray
    W_att1: np.ndarray
    W_att2: np.ndarray

    @classmethod
    def init(cls, config: CellConfig, rng: SeededRng) -> "CellParams":
        return cls(**{k: linalg.init_weights(rng, r, c) for k, (r, c) in config.param_shapes().items()})

    @classmethod
    def zeros(cls, config: CellConfig) -> "CellParams":
        return cls(**{k: linalg.zeros(r, c) for k, (r, c) in config.param_shapes().items()})

    def items(self):
        return [(f.name, getattr(self, f.name)) for f in fields(self)]

    def copy(self) -> "CellParams":
        return CellParams(*(a.copy() for _, a in self.items()))

    def astype(self, dt) -> "CellParams":
        return CellParams(*(a.astype(dt) for _, a in self.items()))


# Gradients share the container: one matrix per parameter and nothing else.
CellGrads = CellParams


@dataclass
class CellActivations:
    X: np.ndarray  # (B, input_dim), before action conditioning
    actions: np.ndarray | None  # taken actions when only those branches were run
    pre: np.ndarray  # (B, H) pre-ReLU
    h: np.ndarray  # (B, H) post-layernorm hidden
    h_inv_std: np.ndarray
    z1: np.ndarray  # (B, K, H)
    z2: np.ndarray  # (B, K, R)
    T: np.ndarray  # (B, K, R, H) tanh(outer(z2, z1))
    M: np.ndarray  # (B, K, R, H) row-normalized T
    M_inv_std: np.ndarray
    y: np.ndarray  # (B, K, R)
    q: np.ndarray  # (B, n_actions), or (B,) when actions were given


def goodness(y: np.ndarray, kind: Goodness | str) -> np.ndarray:
    """Reduce the last axis of ``y`` to a scalar statistic."""
    kind = Goodness(kind)
    y = np.asarray(y)
    if kind is Goodness.MEAN:
        return y.mean(axis=-1)
    if kind is Goodness.MS:
        return (y * y).mean(axis=-1)
    c = y - y.mean(axis=-1, keepdims=True)
    if kind is Goodness.VAR:
        return (c * c).mean(axis=-1)
    return _centered_rms(c)


def _centered_rms(c: np.ndarray, keepdims: bool = False) -> np.ndarray:
    # scale by max|c| first so tiny deviations do not underflow when squared
    m = np.max(np.abs(c), axis=-1, keepdims=True)
    safe = np.where(m > 0, m, 1.0)
    out = m * np.sqrt(((c / safe) ** 2).mean(axis=-1, keepdims=True))
    return out if keepdims else out[..., 0]


def goodness_grad(y: np.ndarray, kind: Goodness | str) -> np.ndarray:
    """d goodness / d y along the last axis; RMS at zero variance gets a zero subgradient."""
    kind = Goodness(kind)
    n = y.shape[-1]
    if kind is Goodness.MEAN:
        return np.full_like(y, 1.0 / n)
    if kind is Goodness.MS:
        return 2.0 * y / n
    c = y - y.mean(axis=-1, keepdims=True)
    if kind is Goodness.VAR:
        return 2.0 * c / n
    rms = _centered_rms(c, keepdims=True)
    safe = np.where(rms > 0, rms, 1.0)
    return np.where(rms > 0, c / (n * safe), 0.0)


def _as_batch(X: np.ndarray, config: CellConfig) -> np.ndarray:
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[1] != config.input_dim:
        raise ValueError(f"cell input shape {X.shape} does not match (batch, {config.input_dim})")
    return X


def _check_params(params: CellParams, config: CellConfig) -> None:
    for name, shape in config.param_shapes().items():
        got = getattr(params, name).shape
        if got != shape:
            raise ValueError(f"{name} has shape {got}, config expects {shape}")


def _attention_inputs(params: CellParams, config: CellConfig, X: np.ndarray, actions):
    n_in = config.input_dim
    if config.conditioning is Conditioning.OUTPUT:
        return (X @ params.W_att1.T)[:, None, :], (X @ params.W_att2.T)[:, None, :]
    # W @ concat(X, onehot(a)) == W[:, :n_in] @ X + W[:, n_in + a]
    z1 = X @ params.W_att1[:, :n_in].T
    z2 = X @ params.W_att2[:, :n_in].T
    a1 = params.W_att1[:, n_in:].T  # (A, H)
    a2 = params.W_att2[:, n_in:].T  # (A, R)
    if actions is None:
        return z1[:, None, :] + a1[None], z2[:, None, :] + a2[None]
    return (z1 + a1[actions])[:, None, :], (z2 + a2[actions])[:, None, :]


def forward(
    params: CellParams,
    config: CellConfig,
    X: np.ndarray,
    actions: np.ndarray | None = None,
) -> tuple[np.ndarray, CellActivations]:
    """Batched cell forward.

    With ``actions=None`` returns Q for every action, shape (B, n_actions).
    With an integer array of taken actions returns Q(s, a) with shape (B,);
    input-conditioned cells then run only that action's branch.
    """
    X = _as_batch(X, config)
    _check_params(params, config)
    if actions is not None:
        actions = np.asarray(actions, dtype=np.int64)
        if actions.shape != (X.shape[0],):
            raise ValueError(f"actions shape {actions.shape} does not match batch {X.shape[0]}")
        if actions.size and (actions.min() < 0 or actions.max() >= config.n_actions):
            raise ValueError("action index out of range")

    pre = X @ params.W_h.T
    h, h_inv_std = layernorm_forward(np.maximum(pre, 0))

    z1, z2 = _attention_inputs(params, config, X, actions)
    T = np.tanh(z2[..., :, None] * z1[..., None, :])
    M, M_inv_std = layernorm_forward(T)
    y = (M @ h[:, None, :, None])[..., 0]

    q = _readout(y, config)
    if actions is not None:
        q = q[:, 0] if config.conditioning is Conditioning.INPUT else q[np.arange(len(actions)), actions]
    acts = CellActivations(X, actions, pre, h, h_inv_std, z1, z2, T, M, M_inv_std, y, q)
    return q, acts


def _readout(y: np.ndarray, config: CellConfig) -> np.ndarray:
    groups = y.reshape(y.shape[0], -1, config.group_dim)
    if config.cell_kind is CellKind.AD:
        return groups[..., 0]
    return goodness(groups, config.goodness)


def forward_ad(params: CellParams, config: CellConfig, X: np.ndarray):
    """Single-sample AD cell with output conditioning: one Q per action."""
    if config.cell_kind is not CellKind.AD or config.conditioning is not Conditioning.OUTPUT:
        raise ValueError("forward_ad needs an output-conditioned AD cell config")
    q, acts = forward(params, config, np.asarray(X)[None, :])
    return q[0], acts


def forward_arq(params: CellParams, config: CellConfig, X: np.ndarray):
    """Single-sample ARQ cell with input conditioning: one pass per action candidate."""
    if config.cell_kind is not CellKind.ARQ or config.conditioning is not Conditioning.INPUT:
        raise ValueError("forward_arq needs an input-conditioned ARQ cell config")
    q, acts = forward(params, config, np.asarray(X)[None, :])
    return q[0], acts


def backward(
    params: CellParams,
    config: CellConfig,
    acts: CellActivations | None,
    dLdQ: np.ndarray,
) -> CellGrads:
    """Gradient of sum(dLdQ * Q) with respect to this cell's three matrices."""
    if acts is None:
        raise ValueError("backward needs the activations cached by forward")
    dLdQ = np.asarray(dLdQ, dtype=acts.y.dtype)
    if dLdQ.shape != acts.q.shape:
        raise ValueError(f"dLdQ shape {dLdQ.shape} does not match Q shape {acts.q.shape}")
    X, actions = acts.X, acts.actions
    B = X.shape[0]
    n_in = config.input_dim

    # Q gradient for every computed branch/group, shape (B, groups).
    if actions is None or config.conditioning is Conditioning.INPUT:
        dq = dLdQ.reshape(B, -1)
    else:
        dq = np.zeros((B, config.n_actions), dtype=dLdQ.dtype)
        dq[np.arange(B), actions] = dLdQ

    groups = acts.y.reshape(B, -1, config.group_dim)
    if config.cell_kind is CellKind.AD:
        dgroups = dq[..., None]
    else:
        dgroups = goodness_grad(groups, config.goodness) * dq[..., None]
    dy = dgroups.reshape(acts.y.shape)  # (B, K, R)

    h = acts.h
    dM = dy[..., :, None] * h[:, None, None, :]
    dh = (dy[..., None, :] @ acts.M)[..., 0, :].sum(axis=1)  # (B, H)

    dT = layernorm_backward(dM, acts.M, acts.M_inv_std)
    dP = dT * (1 - acts.T * acts.T)
    dz2 = (dP * acts.z1[..., None, :]).sum(axis=-1)  # (B, K, R)
    dz1 = (dP * acts.z2[..., :, None]).sum(axis=-2)  # (B, K, H)

    if config.conditioning is Conditioning.OUTPUT:
        dW_att1 = dz1[:, 0].T @ X
        dW_att2 = dz2[:, 0].T @ X
    else:
        dW_att1 = np.empty_like(params.W_att1)
        dW_att2 = np.empty_like(params.W_att2)
        dW_att1[:, :n_in] = dz1.sum(axis=1).T @ X
        dW_att2[:, :n_in] = dz2.sum(axis=1).T @ X
        if actions is None:
            dW_att1[:, n_in:] = dz1.sum(axis=0).T
            dW_att2[:, n_in:] = dz2.sum(axis=0).T
        else:
            onehot = np.zeros((B, config.n_actions), dtype=dz1.dtype)
            onehot[np.arange(B), actions] = 1
            dW_att1[:, n_in:] = dz1[:, 0].T @ onehot
            dW_att2[:, n_in:] = dz2[:, 0].T @ onehot

    dr = layernorm_backward(dh, h, acts.h_inv_std)
    dpre = dr * (acts.pre > 0)
    dW_h = dpre.T @ X
    return CellGrads(dW_h, dW_att1, dW_att2)


# ---------------------------------------------------------------- grad check


@dataclass
class GradCheckReport:
    config: CellConfig
    seed: int
    max_rel_error: dict[str, float]
    failures: dict[str, list[tuple[int, int]]]
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(v < self.tolerance for v in self.max_rel_error.values())


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max |a - n| over the matrix, relative to the largest numeric entry.

    Central differences carry an absolute O(step**2) truncation error, so an
    entry many orders of magnitude below the rest of its matrix cannot be
    resolved relatively; the matrix's own gradient scale is the reference.
    """
    scale = max(float(np.max(np.abs(numeric), initial=0.0)), 1e-12)
    return float(np.max(np.abs(analytic - numeric), initial=0.0)) / scale


def numeric_grad(f: Callable[[], float], w: np.ndarray, step: float = 1e-4) -> np.ndarray:
    """Central differences of the scalar ``f()`` with respect to ``w`` (mutated in place and restored)."""
    g = np.zeros_like(w)
    it = np.nditer(w, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = w[idx]
        w[idx] = orig + step
        fp = f()
        w[idx] = orig - step
        fm = f()
        w[idx] = orig
        g[idx] = (fp - fm) / (2 * step)
    return g


# Sampling constraints for grad-check points. Central differences at the
# fixed step are only a valid oracle away from the ReLU kink and where the
# layernorms and the RMS readout are not close to their degenerate (zero
# spread) points, whose curvature grows like 1/std**3. Rows whose tanh is
# saturated everywhere have gradients near roundoff level and are skipped too.
MAX_INV_STD = 4.0
MIN_GROUP_RMS = 0.05
MIN_TANH_SLOPE = 0.05


def well_conditioned(config: CellConfig, acts: CellActivations, margin: float) -> bool:
    if np.min(np.abs(acts.pre)) <= margin:
        return False
    if acts.h_inv_std.max() > MAX_INV_STD or acts.M_inv_std.max() > MAX_INV_STD:
        return False
    if np.mean(1.0 - acts.T**2, axis=-1).min() < MIN_TANH_SLOPE:
        return False
    if config.cell_kind is CellKind.ARQ and config.goodness is Goodness.RMS:
        groups = acts.y.reshape(acts.y.shape[0], -1, config.group_dim)
        if config.group_dim > 1 and goodness(groups, Goodness.RMS).min() < MIN_GROUP_RMS:
            return False
    return True


def _random_point(config: CellConfig, rng: SeededRng, batch: int, margin: float, actions: bool):
    for _ in range(200):
        params = CellParams.init(config, rng)
        # Fan-in init leaves the attention branch tiny; widen it so tanh and
        # the row layernorm are exercised away from their linear regime.
        params.W_att1 *= 3.0
        params.W_att2 *= 3.0
        # Samples are independent, so rows are accepted one at a time.
        rows, acts_taken = [], []
        for _ in range(50 * batch):
            x = rng.normal(size=(1, config.input_dim))
            a = rng.integers(0, config.n_actions, size=1) if actions else None
            if well_conditioned(config, forward(params, config, x, a)[1], margin):
                rows.append(x)
                acts_taken.append(a)
                if len(rows) == batch:
                    return params, np.concatenate(rows), np.concatenate(acts_taken) if actions else None
    raise RuntimeError(f"no well-conditioned grad-check point found for {config}")


def grad_check(
    config: CellConfig,
    seed: int,
    *,
    batch: int = 3,
    tolerance: float = 1e-4,
    step: float = 1e-4,
    taken_actions: bool = False,
    backward_fn: Callable = backward,
) -> GradCheckReport:
    """Compare ``backward_fn`` against central differences on a random cell.

    Requires 64-bit precision. The checked scalar is sum(dLdQ * Q) with a
    random ``dLdQ``.
    """
    if linalg.get_precision() != 64:
        raise RuntimeError("grad_check requires 64-bit precision")
    rng = SeededRng(seed)
    margin = 10 * step * np.sqrt(config.input_dim)
    params, X, actions = _random_point(config, rng, batch, margin, taken_actions)
    q, acts = forward(params, config, X, actions)
    dLdQ = rng.normal(size=q.shape)

    analytic = backward_fn(params, config, acts, dLdQ)

    def loss() -> float:
        return float(np.sum(dLdQ * forward(params, config, X, actions)[0]))

    errors, failures = {}, {}
    for name, w in params.items():
        num = numeric_grad(loss, w, step)
        ana = getattr(analytic, name)
        errors[name] = relative_error(ana, num)
        scale = max(float(np.max(np.abs(num), initial=0.0)), 1e-12)
        bad = np.argwhere(np.abs(ana - num) >= tolerance * scale)
        if len(bad):
            failures[name] = [tuple(int(i) for i in b) for b in bad[:20]]
    return GradCheckReport(config, seed, errors, failures, tolerance)
