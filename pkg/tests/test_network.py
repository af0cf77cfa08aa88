import numpy as np
import pytest

from arqlab import cells, linalg
from arqlab.cells import CellParams, Conditioning
from arqlab.linalg import SeededRng
from arqlab.network import Ensemble, LocalNetwork, NetworkConfig, QReadout, ensemble_q, select_action, sweep


def small(**kw):
    base = dict(obs_dim=5, n_actions=3, hidden_dims=(6, 5, 4), readout_dims=(3, 3, 3))
    base.update(kw)
    return NetworkConfig(**base)


def test_cell_input_layout():
    cfg = small()
    assert [(c.below_dim, c.above_dim) for c in cfg.cell_configs()] == [(0, 5), (6, 4), (5, 0)]
    assert cfg.topdown_dims == (5, 4)
    assert cfg.param_count() == sum(c.param_count() for c in cfg.cell_configs())


def test_sweep_feeds_obs_below_and_topdown(f64):
    cfg = small()
    rng = SeededRng(0)
    net = LocalNetwork.init(cfg, rng)
    obs = rng.normal(size=(2, 5))
    td = [rng.normal(size=(2, 5)), rng.normal(size=(2, 4))]
    out = sweep(net.online, cfg, obs, td)
    X0, X1, X2 = (a.X for a in out.acts)
    np.testing.assert_array_equal(X0, np.concatenate([obs, td[0]], axis=1))
    np.testing.assert_array_equal(X1, np.concatenate([obs, out.acts[0].h, td[1]], axis=1))
    np.testing.assert_array_equal(X2, np.concatenate([obs, out.acts[1].h], axis=1))
    for l, q in enumerate(out.q):
        want, _ = cells.forward(net.online[l], cfg.cell_config(l), out.acts[l].X)
        np.testing.assert_array_equal(q, want)


def test_sweep_shape_errors():
    cfg = small()
    net = LocalNetwork.init(cfg, SeededRng(0))
    with pytest.raises(ValueError):
        sweep(net.online, cfg, np.zeros((2, 4)), [np.zeros((2, 5)), np.zeros((2, 4))])
    with pytest.raises(ValueError):
        sweep(net.online, cfg, np.zeros((2, 5)), [np.zeros((2, 5))])
    with pytest.raises(ValueError):
        sweep(net.online, cfg, np.zeros((2, 5)), [np.zeros((2, 5)), np.zeros((1, 4))])


def test_act_forward_state_and_snapshot(f64):
    cfg = small()
    rng = SeededRng(1)
    net = LocalNetwork.init(cfg, rng)
    state = net.reset_state()
    assert all(np.all(s == 0) for s in state)
    obs = rng.normal(size=5)
    readout, new_state, snap = net.act_forward(state, obs)
    assert readout.per_cell.shape == (3, 3)
    np.testing.assert_allclose(readout.ensemble, readout.per_cell.mean(axis=0))
    assert len(snap) == 2 and all(np.all(s == 0) for s in snap)
    # the next step sees layers 1..L-1 of the new state as top-down input
    _, _, snap2 = net.act_forward(new_state, obs)
    for a, b in zip(snap2, new_state[1:]):
        np.testing.assert_array_equal(a, b)


def test_topdown_state_changes_lower_layers(f64):
    cfg = small()
    rng = SeededRng(2)
    net = LocalNetwork.init(cfg, rng)
    obs = rng.normal(size=5)
    r0, s1, _ = net.act_forward(net.reset_state(), obs)
    r1, _, _ = net.act_forward(s1, obs)
    assert not np.allclose(r0.per_cell[0], r1.per_cell[0])
    # the top layer has no top-down input, so it only sees obs and the layer below
    assert r0.per_cell.shape == r1.per_cell.shape


def test_zero_weight_network_gives_zero_q():
    cfg = small()
    net = LocalNetwork(cfg, [CellParams.zeros(c) for c in cfg.cell_configs()])
    readout, _, _ = net.act_forward(net.reset_state(), np.ones(5))
    np.testing.assert_array_equal(readout.per_cell, 0.0)
    assert select_action(readout, 0.0, SeededRng(0)) == 0


def test_ensemble_modes():
    per_cell = np.array([[1.0, 2.0], [3.0, 0.0]])
    np.testing.assert_array_equal(ensemble_q(per_cell, Ensemble.MEAN), [2.0, 1.0])
    np.testing.assert_array_equal(ensemble_q(per_cell, Ensemble.TOP), [3.0, 0.0])


def test_select_action_greedy_ties_lowest():
    q = QReadout(np.zeros((1, 4)), np.array([0.5, 2.0, 2.0, 1.0]))
    assert select_action(q, 0.0, SeededRng(0)) == 1


def test_select_action_uniform_at_epsilon_one():
    rng = SeededRng(0)
    counts = np.bincount([select_action(np.array([9.0, 0, 0, 0]), 1.0, rng) for _ in range(8000)], minlength=4)
    # binomial(8000, 1/4): sd ~ 39
    assert np.all(np.abs(counts - 2000) < 5 * 39)


def test_select_action_rejects_bad_epsilon():
    with pytest.raises(ValueError):
        select_action(np.zeros(2), 1.5, SeededRng(0))


def test_target_is_independent_copy():
    cfg = small()
    net = LocalNetwork.init(cfg, SeededRng(0))
    net.online[0].W_h += 1.0
    assert not np.array_equal(net.online[0].W_h, net.target[0].W_h)
    net.sync_target()
    np.testing.assert_array_equal(net.online[0].W_h, net.target[0].W_h)
    net.online[0].W_h += 1.0
    assert not np.array_equal(net.online[0].W_h, net.target[0].W_h)


def test_tensor_round_trip():
    cfg = small(conditioning=Conditioning.OUTPUT)
    a = LocalNetwork.init(cfg, SeededRng(0))
    b = LocalNetwork.init(cfg, SeededRng(1))
    names = [n for n, _ in a.tensors()]
    assert names[0] == "online.0.W_h" and names[-1] == "target.2.W_att2" and len(names) == 18
    b.load_tensors(dict(a.tensors()))
    for (_, x), (_, y) in zip(a.tensors(), b.tensors()):
        np.testing.assert_array_equal(x, y)


def test_load_tensors_shape_mismatch():
    a = LocalNetwork.init(small(), SeededRng(0))
    b = LocalNetwork.init(small(hidden_dims=(7, 5, 4)), SeededRng(0))
    with pytest.raises(ValueError, match="shape"):
        b.load_tensors(dict(a.tensors()))


def test_config_validation():
    with pytest.raises(ValueError):
        small(readout_dims=(3, 3))
    with pytest.raises(ValueError):
        small(hidden_dims=(), readout_dims=())
