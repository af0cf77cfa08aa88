"""Run configuration: JSON files, shipped presets and dotted-path overrides."""

from __future__ import annotations

import copy
import hashlib
import json
from importlib import resources
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, PositiveInt, ValidationError, model_validator

from ..cells import CellKind, Conditioning, Goodness
from ..learner import EpsilonSchedule, LearnerConfig
from ..network import Ensemble, NetworkConfig

DEFAULT_READOUT_DIM = 32


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` holds one line per offending field."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class AgentSection(_Strict):
    kind: Literal["arq", "ad", "dqn"] = "arq"
    goodness: Goodness = Goodness.RMS
    conditioning: Conditioning | None = None
    hidden_dims: list[PositiveInt] = Field(default_factory=lambda: [400, 200, 200], min_length=1)
    readout_dims: list[PositiveInt] | None = None
    ensemble: Ensemble = Ensemble.MEAN

    @model_validator(mode="after")
    def _resolve(self):
        # Fill kind-dependent defaults so the resolved config is explicit.
        if self.conditioning is None:
            cond = Conditioning.OUTPUT if self.kind == "ad" else Conditioning.INPUT
            object.__setattr__(self, "conditioning", cond)
        if self.readout_dims is None:
            dim = 1 if self.kind == "ad" else DEFAULT_READOUT_DIM
            object.__setattr__(self, "readout_dims", [dim] * len(self.hidden_dims))
        if len(self.readout_dims) != len(self.hidden_dims):
            raise ValueError("readout_dims must have one entry per hidden layer")
        return self


class LearnerSection(_Strict):
    gamma: float = Field(0.99, ge=0.0, lt=1.0)
    batch_size: PositiveInt = 512
    learning_starts: int = Field(50_000, ge=0)
    train_frequency: PositiveInt = 1
    target_sync_interval: PositiveInt = 1_000
    buffer_capacity: PositiveInt = 100_000
    lr: float = Field(1e-4, ge=0.0)
    optimizer: Literal["adam", "sgd"] = "adam"
    reward_clip: bool = False
    workers: int = Field(0, ge=0)


class ScheduleSection(_Strict):
    start: float = Field(1.0, ge=0.0, le=1.0)
    end: float = Field(0.01, ge=0.0, le=1.0)
    exploration_fraction: float = Field(0.1, ge=0.0, le=1.0)


class RunConfig(_Strict):
    name: str = "run"
    env: Literal["breakout", "space_invaders", "point_mass"] = "breakout"
    env_options: dict[str, Any] = Field(default_factory=dict)
    agent: AgentSection = Field(default_factory=AgentSection)
    learner: LearnerSection = Field(default_factory=LearnerSection)
    schedule: ScheduleSection = Field(default_factory=ScheduleSection)
    total_steps: PositiveInt = 4_000_000
    seeds: list[int] = Field(default_factory=lambda: [0], min_length=1)
    precision: Literal[32, 64] = 32
    out_dir: str = "runs"
    checkpoint_interval: int = Field(100_000, ge=0)
    metrics_interval: PositiveInt = 1_000

    def resolved(self) -> dict:
        return self.model_dump(mode="json")

    def digest(self) -> str:
        """Hash of everything that affects results (the output directory does not)."""
        data = self.resolved()
        data.pop("out_dir")
        blob = json.dumps(data, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def learner_config(self) -> LearnerConfig:
        return LearnerConfig(**self.learner.model_dump())

    def epsilon_schedule(self) -> EpsilonSchedule:
        return EpsilonSchedule(total_steps=self.total_steps, **self.schedule.model_dump())

    def network_config(self, obs_dim: int, n_actions: int) -> NetworkConfig:
        if self.agent.kind == "dqn":
            raise ValueError("the DQN baseline has no cell network config")
        return NetworkConfig(
            obs_dim=obs_dim,
            n_actions=n_actions,
            hidden_dims=tuple(self.agent.hidden_dims),
            readout_dims=tuple(self.agent.readout_dims),
            cell_kind=CellKind(self.agent.kind),
            goodness=self.agent.goodness,
            conditioning=self.agent.conditioning,
            ensemble=self.agent.ensemble,
        )


def _problems(err: ValidationError) -> list[str]:
    out = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        out.append(f"{loc}: {e['msg']}")
    return out


def from_dict(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_problems(e)) from None


def preset_dir() -> Path:
    return Path(str(resources.files("arqlab") / "presets"))


def list_presets() -> list[str]:
    return sorted(p.stem for p in preset_dir().glob("*.json"))


def read_source(source: str | Path) -> dict:
    """Load a config dict from a file path or a preset name."""
    path = Path(source)
    if not path.exists():
        candidate = preset_dir() / f"{source}.json"
        if not candidate.exists():
            raise ConfigError([f"config: no file or preset named {str(source)!r} (presets: {', '.join(list_presets())})"])
        path = candidate
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError([f"config: {path}: not valid JSON ({e})"]) from None


def parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data: dict, overrides: list[str] | dict) -> dict:
    """Apply ``key.sub=value`` overrides; values are parsed as JSON when possible."""
    out = copy.deepcopy(data)
    items = overrides.items() if isinstance(overrides, dict) else (_split(o) for o in overrides)
    for key, value in items:
        node = out
        parts = key.split(".")
        for p in parts[:-1]:
            child = node.setdefault(p, {})
            if not isinstance(child, dict):
                raise ConfigError([f"{key}: {p} is not a section"])
            node = child
        node[parts[-1]] = parse_value(value) if isinstance(value, str) else value
    return out


def _split(override: str) -> tuple[str, str]:
    key, sep, value = override.partition("=")
    if not sep or not key:
        raise ConfigError([f"--set {override!r}: expected key=value"])
    return key.strip(), value


def load(source: str | Path | None = None, overrides=(), seeds: list[int] | None = None) -> RunConfig:
    data = read_source(source) if source is not None else {}
    data = apply_overrides(data, list(overrides))
    if seeds is not None:
        data["seeds"] = list(seeds)
    return from_dict(data)


def save(config: RunConfig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(config.resolved(), indent=2, sort_keys=True) + "\n")
    return path
