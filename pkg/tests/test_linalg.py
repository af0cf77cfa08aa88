import numpy as np
import pytest

from arqlab import linalg
from arqlab.linalg import SeededRng


def naive_matvec(m, v):
    out = []
    for i in range(len(m)):
        s = 0.0
        for j in range(len(v)):
            s += m[i][j] * v[j]
        out.append(s)
    return np.array(out)


def test_matvec_matches_loops(rng):
    m = rng.normal(size=(5, 7))
    v = rng.normal(size=7)
    np.testing.assert_allclose(linalg.matvec(m, v), naive_matvec(m.tolist(), v.tolist()), rtol=1e-12)


def test_matvec_identity():
    v = np.arange(4.0)
    np.testing.assert_array_equal(linalg.matvec(np.eye(4), v), v)


def test_matvec_shape_mismatch():
    with pytest.raises(ValueError, match="shape mismatch"):
        linalg.matvec(np.ones((3, 4)), np.ones(3))


def test_matvec_nonfinite():
    with pytest.raises(FloatingPointError):
        linalg.matvec(np.array([[np.inf, 1.0]]), np.array([1.0, 1.0]))


def test_outer_matches_loops(rng):
    a, b = rng.normal(size=3), rng.normal(size=4)
    want = [[a[i] * b[j] for j in range(4)] for i in range(3)]
    np.testing.assert_array_equal(linalg.outer(a, b), np.array(want))


def test_relu_and_grad():
    x = np.array([-2.0, 0.0, 3.0])
    np.testing.assert_array_equal(linalg.relu(x), [0.0, 0.0, 3.0])
    np.testing.assert_array_equal(linalg.relu_grad(x), [0.0, 0.0, 1.0])


def test_tanh_grad_finite_difference(rng):
    x = rng.normal(size=50) * 2
    h = 1e-6
    fd = (np.tanh(x + h) - np.tanh(x - h)) / (2 * h)
    np.testing.assert_allclose(linalg.tanh_grad(x), fd, atol=1e-9)


def test_layernorm_statistics(rng):
    x = rng.normal(size=(6, 10)) * 3 + 2
    y = linalg.layernorm(x)
    np.testing.assert_allclose(y.mean(axis=-1), 0, atol=1e-12)
    # population variance, shrunk slightly by eps
    var = x.var(axis=-1)
    np.testing.assert_allclose(y.var(axis=-1), var / (var + linalg.LN_EPS), rtol=1e-12)


def test_layernorm_loop_oracle(rng):
    x = rng.normal(size=8)
    mu = sum(x) / len(x)
    var = sum((xi - mu) ** 2 for xi in x) / len(x)
    want = [(xi - mu) / np.sqrt(var + 1e-5) for xi in x]
    np.testing.assert_allclose(linalg.layernorm(x), want, rtol=1e-12)


def test_layernorm_needs_two_features():
    with pytest.raises(ValueError):
        linalg.layernorm(np.ones((3, 1)))


def test_layernorm_backward_finite_difference(rng, f64):
    x = rng.normal(size=(3, 7))
    dy = rng.normal(size=(3, 7))
    y, inv_std = linalg.layernorm_forward(x)
    analytic = linalg.layernorm_backward(dy, y, inv_std)
    h = 1e-6
    numeric = np.zeros_like(x)
    for idx in np.ndindex(*x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        numeric[idx] = (np.sum(dy * linalg.layernorm(xp)) - np.sum(dy * linalg.layernorm(xm))) / (2 * h)
    np.testing.assert_allclose(analytic, numeric, atol=1e-8)


def test_init_weights_bounds_and_moments():
    w = linalg.init_weights(SeededRng(0), 400, 100)
    bound = np.sqrt(1 / 100)
    assert w.shape == (400, 100)
    assert np.abs(w).max() <= bound
    # uniform(-b, b): mean 0, variance b^2 / 3
    assert abs(w.mean()) < 5 * bound / np.sqrt(3) / np.sqrt(w.size)
    np.testing.assert_allclose(w.var(), bound**2 / 3, rtol=0.02)


def test_init_weights_same_across_precisions():
    with linalg.precision(32):
        a = linalg.init_weights(SeededRng(5), 4, 6)
    with linalg.precision(64):
        b = linalg.init_weights(SeededRng(5), 4, 6)
    assert a.dtype == np.float32 and b.dtype == np.float64
    np.testing.assert_array_equal(a, b.astype(np.float32))


def test_precision_switch_restores():
    before = linalg.get_precision()
    with linalg.precision(64):
        assert linalg.dtype() is np.float64
    assert linalg.get_precision() == before
    with pytest.raises(ValueError):
        linalg.set_precision(16)


def test_seeded_rng_reproducible():
    a, b = SeededRng(9), SeededRng(9)
    np.testing.assert_array_equal(a.normal(size=5), b.normal(size=5))
    c1, c2 = SeededRng(9).spawn(2)
    assert c1.seed != c2.seed
    assert [c.seed for c in SeededRng(9).spawn(2)] == [c1.seed, c2.seed]
