"""Recorded trajectories that pin the grid games to the MinAtar reference.

A fixture is a JSON-lines file. The first line is a header::

    {"fixture_version": 1, "env": "breakout", "seed": 0, "steps": 200,
     "reference": "MinAtar 1.0.15", "sticky_action_prob": 0.1,
     "difficulty_ramping": true, "digest": "blake2b-64"}

followed by one record per event. ``{"t": 0, "event": "reset", "obs": D}``
opens an episode; ``{"t": i, "action": a, "reward": r, "done": d, "obs": D}``
is one step, where ``a`` indexes the minimal action set and ``D`` is the
16-hex-digit blake2b-64 digest of the flattened uint8 observation. After a
step with ``done`` a reset record (without a seed, continuing the random
stream) follows.

``generate`` drives the reference package (``pip install minatar``);
``verify`` replays the same action stream through the native games.
"""

from __future__ import annotations

import hashlib
import json
from importlib import resources
from pathlib import Path

import numpy as np

from .minatar import MinAtarEnv

FIXTURE_VERSION = 1
GAMES = ("breakout", "space_invaders")
DEFAULT_SEEDS = tuple(range(10))
DEFAULT_STEPS = 200


def obs_digest(obs: np.ndarray) -> str:
    data = np.ascontiguousarray(obs, dtype=np.uint8).tobytes()
    return hashlib.blake2b(data, digest_size=8).hexdigest()


def fixture_dir() -> Path:
    return Path(str(resources.files("arqlab.envs") / "fixture_data"))


def fixture_path(game: str, seed: int, directory: Path | None = None) -> Path:
    return (directory or fixture_dir()) / f"{game}_seed{seed}.jsonl"


def action_stream(game: str, seed: int, steps: int, n_actions: int) -> list[int]:
    rng = np.random.Generator(np.random.PCG64([seed, GAMES.index(game)]))
    return [int(a) for a in rng.integers(0, n_actions, size=steps)]


def generate(game: str, seed: int, steps: int = DEFAULT_STEPS, directory: Path | None = None) -> Path:
    """Record a fixture from the reference implementation."""
    try:
        from minatar import Environment
    except ImportError as e:  # pragma: no cover - depends on the optional reference
        raise RuntimeError("regenerating fixtures needs the reference package: pip install minatar") from e
    import minatar

    ref = Environment(game, sticky_action_prob=0.1, difficulty_ramping=True)
    ref.seed(seed)
    ref.reset()
    minimal = ref.minimal_action_set()
    header = {
        "fixture_version": FIXTURE_VERSION,
        "env": game,
        "seed": seed,
        "steps": steps,
        "reference": f"MinAtar {getattr(minatar, '__version__', '1.0.15')}",
        "sticky_action_prob": 0.1,
        "difficulty_ramping": True,
        "digest": "blake2b-64",
    }
    records = [{"t": 0, "event": "reset", "obs": _ref_digest(ref)}]
    for t, a in enumerate(action_stream(game, seed, steps, len(minimal)), start=1):
        r, done = ref.act(minimal[a])
        records.append({"t": t, "action": a, "reward": float(r), "done": bool(done), "obs": _ref_digest(ref)})
        if done:
            ref.reset()
            records.append({"t": t, "event": "reset", "obs": _ref_digest(ref)})
    path = fixture_path(game, seed, directory)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for line in [header, *records]:
            f.write(json.dumps(line, sort_keys=True) + "\n")
    return path


def _ref_digest(ref) -> str:
    return obs_digest(ref.state().reshape(-1).astype(np.uint8))


def load(path: Path) -> tuple[dict, list[dict]]:
    lines = [json.loads(l) for l in Path(path).read_text().splitlines() if l.strip()]
    header = lines[0]
    if header.get("fixture_version") != FIXTURE_VERSION:
        raise ValueError(f"{path}: unsupported fixture version {header.get('fixture_version')}")
    return header, lines[1:]


def verify(path: Path) -> list[str]:
    """Replay a fixture through the native game; returns mismatch descriptions (empty on success)."""
    header, records = load(path)
    env = MinAtarEnv(
        header["env"],
        sticky_action_prob=header["sticky_action_prob"],
        difficulty_ramping=header["difficulty_ramping"],
    )
    errors = []
    first = True
    for rec in records:
        if rec.get("event") == "reset":
            obs = env.reset(seed=header["seed"] if first else None)
            first = False
            if obs_digest(obs) != rec["obs"]:
                errors.append(f"t={rec['t']} reset obs digest {obs_digest(obs)} != {rec['obs']}")
            continue
        if env.done:
            errors.append(f"t={rec['t']} episode already ended but the reference continues")
            break
        obs, r, done = env.step(rec["action"])
        got = (obs_digest(obs), float(r), bool(done))
        want = (rec["obs"], float(rec["reward"]), bool(rec["done"]))
        if got != want:
            errors.append(f"t={rec['t']} got {got}, reference {want}")
    return errors


def all_fixture_paths(directory: Path | None = None) -> list[Path]:
    return sorted((directory or fixture_dir()).glob("*.jsonl"))
