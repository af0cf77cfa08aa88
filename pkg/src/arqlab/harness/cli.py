"""Command-line entry point: ``arqlab <command> ...``.

Exit codes: 0 success, 1 invalid input, 2 a check failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from .. import checkpoint
from ..checks import COMBOS, cell_suite, dqn_grad_check, locality_check
from ..envs import fixtures, make_env
from . import ablate as ablate_mod
from . import config as cfgmod
from .config import ConfigError
from .inspect import DEFAULT_TOP_K, inspect_checkpoint
from .runner import evaluate, load_agent, train

OUT_ENV = "ARQLAB_OUT"
EXIT_OK, EXIT_INPUT, EXIT_CHECK = 0, 1, 2

log = logging.getLogger("arqlab")


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 is reserved for failed checks here.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def parse_seeds(text: str | None) -> list[int] | None:
    if text is None:
        return None
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise InputError(f"--seed {text!r}: expected N or N,N,...") from None
    if not seeds:
        raise InputError("--seed: no seeds given")
    return seeds


def out_root(args, config_out: str) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    return Path(os.environ.get(OUT_ENV, config_out))


def _load_config(args) -> cfgmod.RunConfig:
    overrides = list(args.set or [])
    if args.precision is not None:
        overrides.append(f"precision={args.precision}")
    return cfgmod.load(args.config, overrides, parse_seeds(args.seed))


def _progress(quiet: bool):
    if quiet:
        return None
    last = [0.0]

    def report(seed, step, episode, ret):
        now = time.monotonic()
        if now - last[0] > 10:
            last[0] = now
            print(f"seed {seed} step {step} episode {episode} return {ret:g}", file=sys.stderr, flush=True)

    return report


def cmd_train(args) -> int:
    config = _load_config(args)
    out = out_root(args, config.out_dir)
    if not args.out:
        out = out / config.name
    result = train(config, out, _progress(args.quiet))
    print(json.dumps({**result, "out_dir": str(out)}, indent=2))
    return EXIT_OK


def cmd_eval(args) -> int:
    config, agent, header = load_agent(args.checkpoint, args.digest)
    env = make_env(config.env, **config.env_options)
    if args.episodes < 1:
        raise InputError("--episodes must be >= 1")
    if not 0.0 <= args.epsilon <= 1.0:
        raise InputError("--epsilon must be in [0, 1]")
    stats = evaluate(agent, env, args.episodes, args.seed, args.epsilon)
    stats.update(config_digest=header["config_digest"], step=header.get("step"), seed=args.seed, epsilon=args.epsilon)
    if not args.returns:
        stats.pop("returns")
    print(json.dumps(stats, indent=2))
    return EXIT_OK


def cmd_ablate(args) -> int:
    plan = ablate_mod.load_plan(args.plan)
    if args.seed is not None:
        plan = plan.model_copy(update={"seeds": parse_seeds(args.seed)})
    overrides = list(args.set or [])
    if args.precision is not None:
        overrides.append(f"precision={args.precision}")
    variants = ablate_mod.expand(plan, overrides)
    if args.dry_run:
        print(ablate_mod.describe(variants), end="")
        return EXIT_OK
    out = out_root(args, "runs")
    if not args.out:
        out = out / f"ablation_{plan.name}"
    rows = ablate_mod.run(plan, out, overrides, _progress(args.quiet))
    print(ablate_mod.format_table(rows), end="")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    if args.precision not in (None, 64):
        raise InputError("gradcheck runs in 64-bit precision only")
    ok = True
    reports = cell_suite(args.configs, args.seed)
    for i, (kind, good, cond) in enumerate(COMBOS):
        group = reports[i * args.configs:(i + 1) * args.configs]
        worst = max(max(r.max_rel_error.values()) for r in group)
        passed = all(r.passed for r in group)
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} cell {kind.value}/{good.value}/{cond.value}: {len(group)} configs, max rel err {worst:.2e}")
    dqn = [dqn_grad_check(args.seed * 1000 + i) for i in range(args.configs)]
    worst = max(max(r.max_rel_error.values()) for r in dqn)
    passed = all(r.passed for r in dqn)
    ok &= passed
    print(f"{'PASS' if passed else 'FAIL'} dqn mlp: {len(dqn)} configs, max rel err {worst:.2e}")
    for kind, good, cond in COMBOS:
        rep = locality_check(args.seed, kind=kind, goodness=good, conditioning=cond)
        worst = max(v for e in rep.max_rel_error for v in e.values())
        ok &= rep.passed
        extra = "" if rep.structure_ok else " (" + "; ".join(rep.problems) + ")"
        print(f"{'PASS' if rep.passed else 'FAIL'} locality {kind.value}/{good.value}/{cond.value}: max rel err {worst:.2e}{extra}")
    print("all gradient checks passed" if ok else "gradient checks FAILED")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_inspect(args) -> int:
    table = inspect_checkpoint(args.checkpoint, args.states, args.seed, args.top_k, args.env, args.epsilon)
    text = table.to_tsv()
    if args.output:
        Path(args.output).write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_fixtures(args) -> int:
    directory = Path(args.dir) if args.dir else None
    if args.action == "regenerate":
        seeds = parse_seeds(args.seed) or list(fixtures.DEFAULT_SEEDS)
        for game in fixtures.GAMES:
            for s in seeds:
                print(fixtures.generate(game, s, args.steps, directory))
        return EXIT_OK
    paths = fixtures.all_fixture_paths(directory)
    if not paths:
        raise InputError("no fixture files found")
    ok = True
    for p in paths:
        errors = fixtures.verify(p)
        ok &= not errors
        print(f"{'PASS' if not errors else 'FAIL'} {p.name}" + (f": {errors[0]} (+{len(errors) - 1} more)" if errors else ""))
    return EXIT_OK if ok else EXIT_CHECK


def cmd_presets(args) -> int:
    for name in cfgmod.list_presets():
        print(name)
    for p in sorted((cfgmod.preset_dir() / "plans").glob("*.json")):
        print(f"plan: {p.stem}")
    return EXIT_OK


def _config_flags(p: argparse.ArgumentParser, config: bool = True) -> None:
    if config:
        p.add_argument("--config", help="config file or preset name")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="dotted-path override (repeatable)")
    p.add_argument("--seed", help="seed or comma-separated seeds")
    p.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or the config's out_dir)")
    p.add_argument("--precision", type=int, choices=(32, 64))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="arqlab", description="Local-learning Q agents on small control tasks.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run the acting/learning loop for every seed")
    _config_flags(p)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="roll out a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--digest", help="expected config digest")
    p.add_argument("--returns", action="store_true", help="include per-episode returns")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run an ablation plan and print the comparison table")
    p.add_argument("plan", help="plan file or shipped plan name")
    _config_flags(p, config=False)
    p.add_argument("--dry-run", action="store_true", help="list the variants and parameter counts only")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("gradcheck", help="analytic vs finite-difference gradients, plus locality")
    p.add_argument("--configs", type=int, default=20, help="random configs per combination")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--precision", type=int, choices=(32, 64))
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("inspect", help="top-K first-layer neuron activity per action")
    p.add_argument("checkpoint")
    p.add_argument("--env", help="fail unless the checkpoint was trained on this env")
    p.add_argument("--states", type=int, default=100)
    p.add_argument("--top-k", type=int, default=DEFAULT_TOP_K)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--output", help="also write the table to this file")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("fixtures", help="verify or regenerate the grid-game trajectory fixtures")
    p.add_argument("action", choices=("verify", "regenerate"))
    p.add_argument("--dir")
    p.add_argument("--seed")
    p.add_argument("--steps", type=int, default=fixtures.DEFAULT_STEPS)
    p.set_defaults(func=cmd_fixtures)

    p = sub.add_parser("presets", help="list shipped presets and plans")
    p.set_defaults(func=cmd_presets)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, checkpoint.CheckpointError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
