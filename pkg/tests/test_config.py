import json

import pytest

from arqlab.cells import CellKind, Conditioning, Goodness
from arqlab.harness import ablate
from arqlab.harness import config as cfgmod
from arqlab.harness.config import ConfigError
from arqlab.learner import epsilon_at


def test_defaults_resolve_by_kind():
    arq = cfgmod.from_dict({"name": "x", "env": "breakout"})
    ad = cfgmod.from_dict({"name": "x", "env": "breakout", "agent": {"kind": "ad"}})
    assert arq.agent.conditioning is Conditioning.INPUT and ad.agent.conditioning is Conditioning.OUTPUT
    assert set(ad.agent.readout_dims) == {1} and set(arq.agent.readout_dims) == {32}


def test_overrides_parse_json_values():
    c = cfgmod.load("breakout-arq-paper", ["learner.lr=0.5", "agent.hidden_dims=[8,4]", "agent.readout_dims=[2,2]", "agent.goodness=var", "name=foo"])
    assert c.learner.lr == 0.5 and list(c.agent.hidden_dims) == [8, 4]
    assert c.agent.goodness is Goodness.VAR and c.name == "foo"


@pytest.mark.parametrize(
    "override, needle",
    [
        ("learner.lrr=1", "lrr"),
        ("agent.goodness=median", "goodness"),
        ("learner.lr=-1", "lr"),
        ("env=pong", "env"),
        ("noequals", "key=value"),
    ],
)
def test_bad_overrides_are_diagnosed(override, needle):
    with pytest.raises(ConfigError, match=needle):
        cfgmod.load("breakout-arq-paper", [override])


def test_mismatched_readout_dims_rejected():
    with pytest.raises(ConfigError, match="readout_dims"):
        cfgmod.load("breakout-arq-paper", ["agent.hidden_dims=[8,4]"])


def test_unknown_preset():
    with pytest.raises(ConfigError):
        cfgmod.load("no-such-preset")


def test_digest_ignores_out_dir_only():
    a = cfgmod.load("breakout-arq-paper")
    assert a.digest() == cfgmod.load("breakout-arq-paper", ["out_dir=elsewhere"]).digest()
    assert a.digest() != cfgmod.load("breakout-arq-paper", ["learner.lr=0.001"]).digest()
    # explicit defaults hash the same as implicit ones
    assert a.digest() == cfgmod.load("breakout-arq-paper", ["agent.conditioning=input"]).digest()


def test_save_load_round_trip(tmp_path):
    c = cfgmod.load("point_mass-arq", seeds=[4, 5])
    path = cfgmod.save(c, tmp_path / "c.json")
    again = cfgmod.load(str(path))
    assert again == c and again.digest() == c.digest()
    assert json.loads(path.read_text())["seeds"] == [4, 5]


@pytest.mark.parametrize("name", cfgmod.list_presets())
def test_every_preset_validates(name):
    c = cfgmod.load(name)
    assert c.learner_config().batch_size == c.learner.batch_size
    assert epsilon_at(c.epsilon_schedule(), 0) == c.schedule.start


def test_full_scale_presets_cover_both_games_and_agents():
    names = set(cfgmod.list_presets())
    for game in ("breakout", "space_invaders"):
        for kind in ("arq", "ad", "dqn"):
            assert f"{game}-{kind}-paper" in names


def test_goodness_plan():
    variants = ablate.expand(ablate.load_plan("goodness"))
    assert {v.config.agent.goodness for v in variants} == set(Goodness)
    assert len(variants) == 4
    assert {v.config.agent.kind for v in variants} == {CellKind.ARQ}


def test_conditioning_plan():
    variants = ablate.expand(ablate.load_plan("conditioning"))
    got = {(v.config.agent.kind, v.config.agent.conditioning) for v in variants}
    assert got == {(k, c) for k in (CellKind.AD, CellKind.ARQ) for c in Conditioning}


def test_scale_plan_matches_parameter_counts():
    variants = ablate.expand(ablate.load_plan("scale"))
    assert len(variants) % 2 == 0
    for ref, matched in zip(variants[::2], variants[1::2]):
        assert ref.config.agent.kind != matched.config.agent.kind
        assert abs(ref.param_count - matched.param_count) / ref.param_count < 0.01
    counts = [v.param_count for v in variants[::2]]
    assert counts == sorted(counts)


def test_param_count_dqn_includes_biases():
    c = cfgmod.load("breakout-dqn-paper")
    assert ablate.param_count(c) == 400 * 400 + 400 + 400 * 200 + 200 + 200 * 200 + 200 + 200 * 3 + 3


def test_plan_errors(tmp_path):
    with pytest.raises(ConfigError):
        ablate.load_plan("nope")
    bad = tmp_path / "p.json"
    bad.write_text(json.dumps({"name": "p", "base": "breakout-desk", "variants": [{"name": "a", "set": {"agent.goodness": "x"}}]}))
    with pytest.raises(ConfigError):
        ablate.expand(ablate.load_plan(bad))


@pytest.mark.parametrize("kind, smoke", [("arq", "breakout-smoke"), ("ad", "breakout-ad-smoke"), ("dqn", "breakout-dqn-smoke")])
def test_smoke_presets_differ_from_full_scale_only_in_length(kind, smoke):
    full = cfgmod.load(f"breakout-{kind}-paper").resolved()
    short = cfgmod.load(smoke).resolved()
    diff = {k for k in full if full[k] != short[k]}
    assert diff <= {"name", "total_steps", "seeds", "checkpoint_interval"}
    assert short["total_steps"] == 300_000 and len(short["seeds"]) == 1
