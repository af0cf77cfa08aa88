from .base import Env, EnvSpec, bang_bang_actions, random_policy_baseline
from .minatar import MinAtarEnv
from .point_mass import PointMassEnv

ENV_NAMES = ("breakout", "space_invaders", "point_mass")


def make_env(name: str, **options) -> Env:
    if name in ("breakout", "space_invaders"):
        return MinAtarEnv(name, **options)
    if name == "point_mass":
        return PointMassEnv(**options)
    raise ValueError(f"unknown environment {name!r}; available: {', '.join(ENV_NAMES)}")


__all__ = [
    "ENV_NAMES",
    "Env",
    "EnvSpec",
    "MinAtarEnv",
    "PointMassEnv",
    "bang_bang_actions",
    "make_env",
    "random_policy_baseline",
]
