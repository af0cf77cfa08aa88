"""Dense array primitives shared by the cells, the baseline MLP and the tests.

Arrays are plain numpy arrays. Training runs in float32, gradient checks in
float64; the active precision is a process-wide switch (``set_precision``) and
every parameter/input is cast through ``dtype()`` so the two never mix.
"""

from __future__ import annotations

import contextlib
from typing import Iterator

import numpy as np

LN_EPS = 1e-5

_DTYPES = {32: np.float32, 64: np.float64}
_precision = 32


def set_precision(bits: int) -> None:
    global _precision
    if bits not in _DTYPES:
        raise ValueError(f"precision must be 32 or 64, got {bits!r}")
    _precision = bits


def get_precision() -> int:
    return _precision


def dtype() -> type:
    return _DTYPES[_precision]


@contextlib.contextmanager
def precision(bits: int) -> Iterator[None]:
    previous = _precision
    set_precision(bits)
    try:
        yield
    finally:
        set_precision(previous)


def asarray(x) -> np.ndarray:
    return np.asarray(x, dtype=dtype())


class SeededRng:
    """PCG64 stream seeded from an integer.

    numpy documents the PCG64 bit stream as stable across platforms, and all
    float draws are made in float64 before casting, so a seed yields the same
    values under either precision.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, low, high, size=None) -> np.ndarray:
        return self._gen.uniform(low, high, size)

    def normal(self, size=None, scale: float = 1.0) -> np.ndarray:
        return self._gen.normal(0.0, scale, size)

    def random(self, size=None):
        return self._gen.random(size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def spawn(self, n: int) -> list["SeededRng"]:
        # Child seeds are drawn from this stream, so they are reproducible too.
        seeds = self._gen.integers(0, 2**63 - 1, size=n)
        return [SeededRng(int(s)) for s in seeds]


def _check_finite(name: str, x: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise FloatingPointError(f"{name} produced non-finite values")
    return x


def matvec(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    m = np.asarray(m)
    v = np.asarray(v)
    if m.ndim != 2 or v.ndim != 1 or m.shape[1] != v.shape[0]:
        raise ValueError(f"matvec shape mismatch: matrix {m.shape} vs vector {v.shape}")
    return _check_finite("matvec", m @ v)


def outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return _check_finite("outer", np.multiply.outer(np.asarray(a), np.asarray(b)))


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_grad(pre: np.ndarray) -> np.ndarray:
    # Derivative at exactly 0 is taken as 0.
    return (pre > 0).astype(np.asarray(pre).dtype)


def tanh(x: np.ndarray) -> np.ndarray:
    return np.tanh(x)


def tanh_grad(pre: np.ndarray) -> np.ndarray:
    t = np.tanh(pre)
    return 1 - t * t


def layernorm_forward(x: np.ndarray, eps: float = LN_EPS) -> tuple[np.ndarray, np.ndarray]:
    """Normalize over the last axis; return the output and 1/std for the backward pass."""
    x = np.asarray(x)
    if x.shape[-1] < 2:
        raise ValueError(f"layernorm needs at least 2 features, got {x.shape[-1]}")
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    return centered * inv_std, inv_std


def layernorm(x: np.ndarray, eps: float = LN_EPS) -> np.ndarray:
    return layernorm_forward(x, eps)[0]


def layernorm_backward(dy: np.ndarray, y: np.ndarray, inv_std: np.ndarray) -> np.ndarray:
    """Input gradient of the affine-free layernorm given its output ``y`` and cached 1/std."""
    mean_dy = dy.mean(axis=-1, keepdims=True)
    mean_dy_y = (dy * y).mean(axis=-1, keepdims=True)
    return inv_std * (dy - mean_dy - y * mean_dy_y)


def init_weights(rng: SeededRng, rows: int, cols: int) -> np.ndarray:
    """Fan-in uniform init on [-sqrt(1/cols), sqrt(1/cols)]."""
    if rows <= 0 or cols <= 0:
        raise ValueError(f"init_weights needs positive shape, got ({rows}, {cols})")
    bound = np.sqrt(1.0 / cols)
    return rng.uniform(-bound, bound, size=(rows, cols)).astype(dtype())


def zeros(*shape: int) -> np.ndarray:
    return np.zeros(shape, dtype=dtype())
