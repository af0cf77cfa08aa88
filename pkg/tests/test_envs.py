import json

import numpy as np
import pytest

from arqlab.envs import ENV_NAMES, MinAtarEnv, PointMassEnv, bang_bang_actions, fixtures, make_env, random_policy_baseline

BREAKOUT = {"paddle": 0, "ball": 1, "trail": 2, "brick": 3}


def grid(obs, channels=4):
    return obs.reshape(10, 10, channels)


def ball(obs):
    ys, xs = np.nonzero(grid(obs)[:, :, BREAKOUT["ball"]])
    assert len(xs) == 1
    return int(xs[0]), int(ys[0])


def left_start_seed():
    # first draw of a fresh stream picks the ball's start side
    return next(s for s in range(100) if np.random.RandomState(s).randint(2) == 0)


@pytest.mark.parametrize("name", ["breakout", "space_invaders"])
def test_grid_obs_binary_and_sized(name):
    env = make_env(name)
    obs = env.reset(seed=3)
    assert obs.shape == (env.spec.obs_dim,) and obs.dtype == np.uint8
    rng = np.random.default_rng(0)
    for _ in range(300):
        obs, r, done = env.step(int(rng.integers(env.spec.n_actions)))
        assert set(np.unique(obs)) <= {0, 1}
        assert r >= 0 and r == int(r)
        if done:
            obs = env.reset()


def test_specs():
    assert make_env("breakout").spec.obs_dim == 400 and make_env("breakout").spec.n_actions == 3
    assert make_env("space_invaders").spec.obs_dim == 600 and make_env("space_invaders").spec.n_actions == 4
    assert make_env("point_mass").spec.obs_dim == 6 and make_env("point_mass").spec.n_actions == 4
    assert set(ENV_NAMES) == {"breakout", "space_invaders", "point_mass"}
    with pytest.raises(ValueError):
        make_env("pong")


@pytest.mark.parametrize("name", ENV_NAMES)
def test_same_seed_same_trajectory(name):
    def run():
        env = make_env(name)
        out = [env.reset(seed=11).tobytes()]
        rng = np.random.default_rng(5)
        for _ in range(150):
            o, r, d = env.step(int(rng.integers(env.spec.n_actions)))
            out.append((o.tobytes(), r, d))
            if d:
                out.append(env.reset().tobytes())
        return out

    assert run() == run()


@pytest.mark.parametrize("name", ENV_NAMES)
def test_step_after_done_and_bad_action(name):
    env = make_env(name)
    with pytest.raises(RuntimeError):
        env.step(0)
    env.reset(seed=0)
    with pytest.raises(ValueError):
        env.step(env.spec.n_actions)
    done = False
    while not done:
        _, _, done = env.step(0)
    with pytest.raises(RuntimeError):
        env.step(0)


def test_breakout_initial_state():
    o = grid(make_env("breakout").reset(seed=0))
    assert o[1:4, :, BREAKOUT["brick"]].all() and o[:, :, BREAKOUT["brick"]].sum() == 30
    assert o[:, :, BREAKOUT["ball"]].sum() == 1
    assert o[9, 4, BREAKOUT["paddle"]] == 1


def test_breakout_scripted_trajectory():
    # Ball starts at (x=0, y=3) moving down-right, paddle at column 4.
    # One step right puts the paddle under the ball; it bounces up-right,
    # off the right wall, hits the brick at (8, 3) on step 11 and reverses.
    env = MinAtarEnv("breakout", sticky_action_prob=0.0)
    obs = env.reset(seed=left_start_seed())
    assert ball(obs) == (0, 3)
    actions = [2] + [0] * 11
    path = [(1, 4), (2, 5), (3, 6), (4, 7), (5, 8), (6, 8), (7, 7), (8, 6), (9, 5), (9, 4), (8, 4), (7, 5)]
    rewards = []
    for a, want in zip(actions, path):
        obs, r, done = env.step(a)
        assert ball(obs) == want and not done
        rewards.append(r)
    assert rewards == [0] * 10 + [1.0, 0]
    g = grid(obs)
    assert g[3, 8, BREAKOUT["brick"]] == 0 and g[:, :, BREAKOUT["brick"]].sum() == 29


def test_breakout_missed_ball_ends_episode():
    env = MinAtarEnv("breakout", sticky_action_prob=0.0)
    env.reset(seed=left_start_seed())
    for _ in range(5):
        _, r, done = env.step(0)
        assert not done
    _, r, done = env.step(0)
    assert done and r == 0


def test_space_invaders_terminates():
    env = make_env("space_invaders")
    env.reset(seed=1)
    for _ in range(5000):
        _, _, done = env.step(0)
        if done:
            break
    assert done


def test_sticky_actions_repeat_previous():
    # with probability one the first action (noop) repeats forever
    env = MinAtarEnv("breakout", sticky_action_prob=1.0)
    obs = env.reset(seed=0)
    obs2, _, _ = env.step(2)
    assert np.array_equal(grid(obs)[9, :, 0], grid(obs2)[9, :, 0])


def test_bang_bang():
    np.testing.assert_array_equal(bang_bang_actions(1), [[-1], [1]])
    a3 = bang_bang_actions(3)
    assert len(a3) == 8
    np.testing.assert_array_equal(a3[0], [-1, -1, -1])
    np.testing.assert_array_equal(a3[-1], [1, 1, 1])
    for k in range(1, 9):
        acts = bang_bang_actions(k)
        assert len({tuple(v) for v in acts}) == 2**k == len(acts)
    with pytest.raises(ValueError):
        bang_bang_actions(0)
    with pytest.raises(ValueError):
        bang_bang_actions(17)


def test_point_mass_alternating_force_stays_near_start():
    # (+1, -1) from rest leaves a net displacement of exactly dt**2 after each
    # pair, so the literal alternation drifts; the symmetric pattern
    # (+1, -1, -1, +1) returns to within dt**2 of the start at every step.
    env = PointMassEnv(k=2)
    env.reset(seed=0)
    env.position = np.zeros(2)
    env.target = np.full(2, 0.5)
    forces = {tuple(f): i for i, f in enumerate(bang_bang_actions(2))}
    plus, minus = forces[(1.0, 1.0)], forces[(-1.0, -1.0)]
    env.step(plus)
    env.step(minus)
    np.testing.assert_allclose(env.position, env.dt**2, rtol=1e-12)
    env.position = np.zeros(2)
    env.velocity = np.zeros(2)
    for a in [plus, minus, minus, plus] * 25:
        env.step(a)
        assert np.max(np.abs(env.position)) <= env.dt**2 + 1e-15


def test_point_mass_reward_walls_and_horizon():
    env = PointMassEnv(k=2, horizon=50)
    obs = env.reset(seed=3)
    assert obs.dtype == np.float32 and obs.shape == (6,)
    push = {tuple(f): i for i, f in enumerate(bang_bang_actions(2))}[(1.0, 1.0)]
    for t in range(50):
        obs, r, done = env.step(push)
        assert 0.0 <= r <= 1.0
        assert np.all(np.abs(env.position) <= 1.0)
        assert done == (t == 49)
    # pushed into the corner: clipped, velocity zeroed on contact
    np.testing.assert_array_equal(env.position, [1.0, 1.0])
    np.testing.assert_allclose(obs[4:], env.target - env.position, rtol=1e-6)
    env2 = PointMassEnv()
    env2.reset(seed=0)
    env2.position = env2.target.copy()
    assert env2.reward() == 1.0


def test_random_policy_baseline_deterministic():
    a = random_policy_baseline(make_env("breakout"), 50, seed=0)
    b = random_policy_baseline(make_env("breakout"), 50, seed=0)
    assert a == b and a[0] >= 0
    with pytest.raises(ValueError):
        random_policy_baseline(make_env("breakout"), 0, seed=0)


def test_committed_fixtures_cover_both_games():
    paths = fixtures.all_fixture_paths()
    for game in fixtures.GAMES:
        mine = [p for p in paths if p.name.startswith(game + "_seed")]
        assert len(mine) >= 5
        for p in mine:
            header, records = fixtures.load(p)
            assert header["env"] == game and header["steps"] >= 200
            assert sum("action" in r for r in records) == header["steps"]


@pytest.mark.parametrize("path", fixtures.all_fixture_paths(), ids=lambda p: p.stem)
def test_fixture_replays(path):
    assert fixtures.verify(path) == []


def _tamper(tmp_path, mutate):
    src = fixtures.fixture_path("breakout", 0)
    lines = [json.loads(l) for l in src.read_text().splitlines()]
    mutate(lines)
    dst = tmp_path / src.name
    dst.write_text("\n".join(json.dumps(l) for l in lines) + "\n")
    return dst


def test_fixture_detects_wrong_reward(tmp_path):
    def flip(lines):
        rec = next(r for r in lines[1:] if "action" in r and r["t"] > 20)
        rec["reward"] = rec["reward"] + 1
    assert fixtures.verify(_tamper(tmp_path, flip))


def test_fixture_detects_wrong_obs(tmp_path):
    def corrupt(lines):
        lines[5]["obs"] = "0" * 16
    assert fixtures.verify(_tamper(tmp_path, corrupt))


def test_fixture_detects_other_sticky_setting(tmp_path):
    def change(lines):
        lines[0]["sticky_action_prob"] = 0.0
    assert fixtures.verify(_tamper(tmp_path, change))


def test_fixture_version_checked(tmp_path):
    def bump(lines):
        lines[0]["fixture_version"] = 99
    with pytest.raises(ValueError):
        fixtures.load(_tamper(tmp_path, bump))


def test_matches_reference_package_directly():
    minatar = pytest.importorskip("minatar")
    for game in ("breakout", "space_invaders"):
        for seed in range(3):
            ref = minatar.Environment(game, sticky_action_prob=0.1, difficulty_ramping=True)
            ref.seed(seed)
            ref.reset()
            env = MinAtarEnv(game)
            obs = env.reset(seed=seed)
            minimal = ref.minimal_action_set()
            rng = np.random.default_rng(seed)
            for _ in range(500):
                assert np.array_equal(obs, ref.state().reshape(-1).astype(np.uint8))
                a = int(rng.integers(len(minimal)))
                r_ref, d_ref = ref.act(minimal[a])
                obs, r, d = env.step(a)
                assert (r, d) == (float(r_ref), bool(d_ref))
                if d:
                    ref.reset()
                    obs = env.reset()
