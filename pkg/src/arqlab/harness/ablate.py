"""Ablation plans: named config deltas run over a shared seed list.

A plan file looks like::

    {"name": "goodness", "base": "breakout-arq-paper", "seeds": [0, 1, 2],
     "variants": [{"name": "RMS", "set": {"agent.goodness": "rms"}}, ...]}

A plan may instead carry a ``scale`` block; its variants are generated by
scaling the hidden dims of the reference agent and sizing the other agent so
both have the same parameter count (within ``tolerance``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..envs import make_env
from . import config as cfgmod
from .config import ConfigError, RunConfig
from .runner import train


class ScaleBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")
    ratios: list[float] = Field(default_factory=lambda: [0.5, 1.0, 1.5, 2.0], min_length=1)
    reference: str = "arq"
    matched: str = "ad"
    tolerance: float = 0.01


class VariantSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")
    name: str
    set: dict = Field(default_factory=dict)


class AblationPlan(BaseModel):
    model_config = ConfigDict(extra="forbid")
    name: str
    base: str
    seeds: list[int] = Field(default_factory=lambda: [0, 1, 2], min_length=1)
    set: dict = Field(default_factory=dict)
    variants: list[VariantSpec] = Field(default_factory=list)
    scale: ScaleBlock | None = None


def load_plan(source: str | Path) -> AblationPlan:
    path = Path(source)
    if not path.exists():
        path = cfgmod.preset_dir() / "plans" / f"{source}.json"
    if not path.exists():
        names = sorted(p.stem for p in (cfgmod.preset_dir() / "plans").glob("*.json"))
        raise ConfigError([f"plan: no file or shipped plan named {str(source)!r} (plans: {', '.join(names)})"])
    try:
        return AblationPlan.model_validate(json.loads(path.read_text()))
    except json.JSONDecodeError as e:
        raise ConfigError([f"plan: {path}: not valid JSON ({e})"]) from None
    except ValidationError as e:
        raise ConfigError(cfgmod._problems(e)) from None


@dataclass
class Variant:
    name: str
    config: RunConfig
    param_count: int


def param_count(config: RunConfig) -> int:
    spec = make_env(config.env, **config.env_options).spec
    if config.agent.kind == "dqn":
        dims = [spec.obs_dim, *config.agent.hidden_dims, spec.n_actions]
        return sum(a * b + b for a, b in zip(dims[:-1], dims[1:]))
    return config.network_config(spec.obs_dim, spec.n_actions).param_count()


def _with_dims(base: dict, kind: str, dims: list[int]) -> RunConfig:
    data = cfgmod.apply_overrides(base, {"agent.kind": kind, "agent.hidden_dims": dims})
    agent = data.setdefault("agent", {})
    # Kind-dependent defaults are re-resolved for the new agent.
    for key in ("readout_dims", "conditioning"):
        agent.pop(key, None)
    return cfgmod.from_dict(data)


def _scaled(dims, s: float) -> list[int]:
    return [max(2, int(round(d * s))) for d in dims]


def match_dims(base: dict, kind: str, base_dims: list[int], target: int, tolerance: float) -> RunConfig:
    """Hidden dims for ``kind`` whose parameter count is within ``tolerance`` of ``target``.

    Scales ``base_dims`` by a common factor found by bisection, then nudges the
    first layer one unit at a time to close the rounding gap.
    """
    lo, hi = 1e-3, 1.0
    while param_count(_with_dims(base, kind, _scaled(base_dims, hi))) < target:
        hi *= 2
        if hi > 1e4:
            raise ValueError(f"cannot reach {target} parameters with {kind}")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if param_count(_with_dims(base, kind, _scaled(base_dims, mid))) < target:
            lo = mid
        else:
            hi = mid
    best = None
    for s in (lo, hi):
        dims = _scaled(base_dims, s)
        for delta in range(-50, 51):
            trial = [max(2, dims[0] + delta), *dims[1:]]
            cfg = _with_dims(base, kind, trial)
            err = abs(param_count(cfg) - target) / target
            if best is None or err < best[0]:
                best = (err, cfg)
    if best[0] >= tolerance:
        raise ValueError(f"closest {kind} parameter count is {best[0]:.2%} away from {target}")
    return best[1]


def expand(plan: AblationPlan, overrides=()) -> list[Variant]:
    """Resolve every variant of ``plan`` to a validated RunConfig."""
    base = cfgmod.apply_overrides(cfgmod.read_source(plan.base), plan.set)
    base = cfgmod.apply_overrides(base, list(overrides))
    base["seeds"] = list(plan.seeds)
    out = []
    for v in plan.variants:
        data = cfgmod.apply_overrides(base, v.set)
        data["name"] = f"{plan.name}/{v.name}"
        config = cfgmod.from_dict(data)
        out.append(Variant(v.name, config, param_count(config)))
    if plan.scale is not None:
        sc = plan.scale
        ref_base = cfgmod.from_dict(base)
        base_dims = list(ref_base.agent.hidden_dims)
        for ratio in sc.ratios:
            ref = _with_dims(base, sc.reference, _scaled(base_dims, ratio))
            target = param_count(ref)
            matched = match_dims(base, sc.matched, base_dims, target, sc.tolerance)
            for kind, cfg in ((sc.reference, ref), (sc.matched, matched)):
                name = f"{kind.upper()} x{ratio:g}"
                cfg = cfgmod.from_dict({**cfg.resolved(), "name": f"{plan.name}/{name}"})
                out.append(Variant(name, cfg, param_count(cfg)))
    if not out:
        raise ConfigError([f"plan {plan.name}: no variants"])
    return out


@dataclass
class AblationRow:
    variant: str
    params: int
    hidden_dims: list[int]
    mean: float | None
    std: float | None
    per_seed: list[float] = field(default_factory=list)


def run(plan: AblationPlan, out_dir: Path, overrides=(), progress=None) -> list[AblationRow]:
    rows = []
    for v in expand(plan, overrides):
        slug = v.name.replace(" ", "_").replace("/", "-")
        result = train(v.config, Path(out_dir) / slug, progress)
        rows.append(AblationRow(v.name, v.param_count, list(v.config.agent.hidden_dims), result["mean"], result["std"], result["per_seed"]))
    write_table(rows, plan, Path(out_dir))
    return rows


def format_table(rows: list[AblationRow]) -> str:
    lines = ["| variant | params | hidden dims | return (mean ± std) | per seed |", "|---|---|---|---|---|"]
    for r in rows:
        score = "n/a" if r.mean is None else f"{r.mean:.2f} ± {r.std:.2f}"
        seeds = ", ".join(f"{x:.2f}" for x in r.per_seed)
        lines.append(f"| {r.variant} | {r.params} | {'/'.join(map(str, r.hidden_dims))} | {score} | {seeds} |")
    return "\n".join(lines) + "\n"


def write_table(rows: list[AblationRow], plan: AblationPlan, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"ablation_{plan.name}.md").write_text(format_table(rows))
    with open(out_dir / f"ablation_{plan.name}.tsv", "w") as f:
        f.write("variant\tparams\thidden_dims\tmean\tstd\tper_seed\n")
        for r in rows:
            mean = "" if r.mean is None else repr(r.mean)
            std = "" if r.std is None else repr(r.std)
            f.write(f"{r.variant}\t{r.params}\t{'/'.join(map(str, r.hidden_dims))}\t{mean}\t{std}\t{json.dumps(r.per_seed)}\n")


def describe(variants: list[Variant]) -> str:
    lines = ["| variant | params | hidden dims | agent |", "|---|---|---|---|"]
    for v in variants:
        a = v.config.agent
        lines.append(f"| {v.name} | {v.param_count} | {'/'.join(map(str, a.hidden_dims))} | {a.kind} {a.goodness.value} {a.conditioning.value} |")
    return "\n".join(lines) + "\n"
