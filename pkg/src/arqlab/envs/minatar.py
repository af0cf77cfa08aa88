"""Native Breakout and SpaceInvaders with MinAtar semantics.

Game rules, the action map, sticky actions and the order of random draws
follow MinAtar 1.0.x so that a seeded episode here replays the reference
bit for bit (see ``fixtures``). Observations are the 10x10xC boolean grid
flattened in (row, column, channel) order as uint8.

Agents act over the game's minimal action set; index ``i`` maps to the
MinAtar action ``minimal_action_set[i]``.
"""

from __future__ import annotations

import numpy as np

from .base import EnvSpec

ACTION_MAP = ["n", "l", "u", "r", "d", "f"]


class Breakout:
    channels = {"paddle": 0, "ball": 1, "trail": 2, "brick": 3}
    minimal_actions = ["n", "l", "r"]

    def __init__(self, random: np.random.RandomState):
        self.random = random

    def reset(self) -> None:
        self.ball_y = 3
        ball_start = self.random.randint(2)
        self.ball_x, self.ball_dir = [(0, 2), (9, 3)][ball_start]
        self.pos = 4
        self.brick_map = np.zeros((10, 10))
        self.brick_map[1:4, :] = 1
        self.strike = False
        self.last_x = self.ball_x
        self.last_y = self.ball_y
        self.terminal = False

    def act(self, a: str) -> tuple[int, bool]:
        r = 0
        if a == "l":
            self.pos = max(0, self.pos - 1)
        elif a == "r":
            self.pos = min(9, self.pos + 1)

        self.last_x, self.last_y = self.ball_x, self.ball_y
        # ball_dir: 0 up-left, 1 up-right, 2 down-right, 3 down-left
        dx, dy = [(-1, -1), (1, -1), (1, 1), (-1, 1)][self.ball_dir]
        new_x, new_y = self.ball_x + dx, self.ball_y + dy

        strike_toggle = False
        if new_x < 0 or new_x > 9:
            new_x = min(max(new_x, 0), 9)
            self.ball_dir = [1, 0, 3, 2][self.ball_dir]
        if new_y < 0:
            new_y = 0
            self.ball_dir = [3, 2, 1, 0][self.ball_dir]
        elif self.brick_map[new_y, new_x] == 1:
            strike_toggle = True
            if not self.strike:
                r += 1
                self.strike = True
                self.brick_map[new_y, new_x] = 0
                new_y = self.last_y
                self.ball_dir = [3, 2, 1, 0][self.ball_dir]
        elif new_y == 9:
            if np.count_nonzero(self.brick_map) == 0:
                self.brick_map[1:4, :] = 1
            if self.ball_x == self.pos:
                self.ball_dir = [3, 2, 1, 0][self.ball_dir]
                new_y = self.last_y
            elif new_x == self.pos:
                self.ball_dir = [2, 3, 0, 1][self.ball_dir]
                new_y = self.last_y
            else:
                self.terminal = True

        if not strike_toggle:
            self.strike = False
        self.ball_x, self.ball_y = new_x, new_y
        return r, self.terminal

    def state(self) -> np.ndarray:
        s = np.zeros((10, 10, len(self.channels)), dtype=bool)
        s[self.ball_y, self.ball_x, self.channels["ball"]] = 1
        s[9, self.pos, self.channels["paddle"]] = 1
        s[self.last_y, self.last_x, self.channels["trail"]] = 1
        s[:, :, self.channels["brick"]] = self.brick_map
        return s


SHOT_COOL_DOWN = 5
ENEMY_MOVE_INTERVAL = 12
ENEMY_SHOT_INTERVAL = 10


class SpaceInvaders:
    channels = {
        "cannon": 0,
        "alien": 1,
        "alien_left": 2,
        "alien_right": 3,
        "friendly_bullet": 4,
        "enemy_bullet": 5,
    }
    minimal_actions = ["n", "l", "r", "f"]

    def __init__(self, random: np.random.RandomState, ramping: bool = True):
        self.random = random
        self.ramping = ramping

    def reset(self) -> None:
        self.pos = 5
        self.f_bullet_map = np.zeros((10, 10))
        self.e_bullet_map = np.zeros((10, 10))
        self.alien_map = np.zeros((10, 10))
        self.alien_map[0:4, 2:8] = 1
        self.alien_dir = -1
        self.enemy_move_interval = ENEMY_MOVE_INTERVAL
        self.alien_move_timer = self.enemy_move_interval
        self.alien_shot_timer = ENEMY_SHOT_INTERVAL
        self.ramp_index = 0
        self.shot_timer = 0
        self.terminal = False

    def act(self, a: str) -> tuple[int, bool]:
        r = 0
        if a == "f" and self.shot_timer == 0:
            self.f_bullet_map[9, self.pos] = 1
            self.shot_timer = SHOT_COOL_DOWN
        elif a == "l":
            self.pos = max(0, self.pos - 1)
        elif a == "r":
            self.pos = min(9, self.pos + 1)

        self.f_bullet_map = np.roll(self.f_bullet_map, -1, axis=0)
        self.f_bullet_map[9, :] = 0

        self.e_bullet_map = np.roll(self.e_bullet_map, 1, axis=0)
        self.e_bullet_map[0, :] = 0
        if self.e_bullet_map[9, self.pos]:
            self.terminal = True

        if self.alien_map[9, self.pos]:
            self.terminal = True
        if self.alien_move_timer == 0:
            self.alien_move_timer = min(np.count_nonzero(self.alien_map), self.enemy_move_interval)
            at_left = np.sum(self.alien_map[:, 0]) > 0 and self.alien_dir < 0
            at_right = np.sum(self.alien_map[:, 9]) > 0 and self.alien_dir > 0
            if at_left or at_right:
                self.alien_dir = -self.alien_dir
                if np.sum(self.alien_map[9, :]) > 0:
                    self.terminal = True
                self.alien_map = np.roll(self.alien_map, 1, axis=0)
            else:
                self.alien_map = np.roll(self.alien_map, self.alien_dir, axis=1)
            if self.alien_map[9, self.pos]:
                self.terminal = True
        if self.alien_shot_timer == 0:
            self.alien_shot_timer = ENEMY_SHOT_INTERVAL
            row, col = self._nearest_alien(self.pos)
            self.e_bullet_map[row, col] = 1

        kill = np.logical_and(self.alien_map, self.alien_map == self.f_bullet_map)
        r += int(np.sum(kill))
        self.alien_map[kill] = 0
        self.f_bullet_map[kill] = 0

        self.shot_timer -= self.shot_timer > 0
        self.alien_move_timer -= 1
        self.alien_shot_timer -= 1
        if np.count_nonzero(self.alien_map) == 0:
            if self.enemy_move_interval > 6 and self.ramping:
                self.enemy_move_interval -= 1
                self.ramp_index += 1
            self.alien_map[0:4, 2:8] = 1
        return r, self.terminal

    def _nearest_alien(self, pos: int):
        # Columns by distance from the cannon; stable sort keeps the left one on ties.
        for col in sorted(range(10), key=lambda c: abs(c - pos)):
            if np.sum(self.alien_map[:, col]) > 0:
                return int(np.max(np.where(self.alien_map[:, col] == 1))), col
        return None

    def state(self) -> np.ndarray:
        s = np.zeros((10, 10, len(self.channels)), dtype=bool)
        s[9, self.pos, self.channels["cannon"]] = 1
        s[:, :, self.channels["alien"]] = self.alien_map
        side = "alien_left" if self.alien_dir < 0 else "alien_right"
        s[:, :, self.channels[side]] = self.alien_map
        s[:, :, self.channels["friendly_bullet"]] = self.f_bullet_map
        s[:, :, self.channels["enemy_bullet"]] = self.e_bullet_map
        return s


GAMES = {"breakout": Breakout, "space_invaders": SpaceInvaders}


class MinAtarEnv:
    """Episodic wrapper with sticky actions over the minimal action set.

    ``reset(seed)`` behaves like a fresh reference environment seeded with
    ``seed``; ``reset()`` continues the same random stream and, like the
    reference, keeps the last action for the sticky-action rule.
    """

    def __init__(self, game: str, sticky_action_prob: float = 0.1, difficulty_ramping: bool = True):
        if game not in GAMES:
            raise ValueError(f"unknown MinAtar game {game!r}; available: {sorted(GAMES)}")
        self.name = game
        self.sticky_action_prob = sticky_action_prob
        self.difficulty_ramping = difficulty_ramping
        self.random = np.random.RandomState()
        self._make_game()
        self._actions = [ACTION_MAP.index(a) for a in self.game.minimal_actions]
        self.spec = EnvSpec(
            obs_dim=10 * 10 * len(self.game.channels),
            n_actions=len(self._actions),
            reward_range=(0.0, float("inf")),
            obs_dtype=np.uint8,
        )
        self.last_action = 0
        self.done = True

    def _make_game(self) -> None:
        cls = GAMES[self.name]
        self.game = cls(self.random, self.difficulty_ramping) if cls is SpaceInvaders else cls(self.random)

    def seed(self, seed: int) -> None:
        self.random = np.random.RandomState(seed)
        self.game.random = self.random

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self.seed(seed)
            self.last_action = 0
        self.game.reset()
        self.done = False
        return self.observe()

    def observe(self) -> np.ndarray:
        return self.game.state().reshape(-1).astype(np.uint8)

    def step(self, action: int) -> tuple[np.ndarray, float, bool]:
        if self.done:
            raise RuntimeError("step() called on a finished episode; call reset()")
        if not 0 <= action < self.spec.n_actions:
            raise ValueError(f"action {action} out of range for {self.spec.n_actions} actions")
        a = self._actions[action]
        if self.random.rand() < self.sticky_action_prob:
            a = self.last_action
        self.last_action = a
        r, done = self.game.act(ACTION_MAP[a])
        self.done = bool(done)
        return self.observe(), float(r), self.done
