"""Stochastic fruit choice: kick through locked doors, then eat one fruit.

An abstract stand-in for the NetHack task.  Rooms are a chain; the agent
starts in room 0 and the fruit room is room ``room_count``.  Which fruit is
correct is hidden until it is eaten.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import EpisodeDone
from .level import APPLE, BANANA, MAX_ROOMS, Level, validate_level
from .maze import StepResult

KICK, MOVE, EAT_APPLE, EAT_BANANA = 0, 1, 2, 3


@dataclass
class FruitObservation:
    room: int
    door_present: bool
    door_open: bool
    fruit_visible: bool


@dataclass
class FruitState:
    room: int
    kicks_left: list
    t: int
    done: bool
    correct_fruit: str
    ate: str | None = None

    def copy(self) -> "FruitState":
        return FruitState(self.room, list(self.kicks_left), self.t, self.done,
                          self.correct_fruit, self.ate)


@dataclass
class FruitChoiceEnv:
    r_apple: float = 3.0
    r_banana: float = 10.0
    t_max: int = 100
    n_actions: int = 4
    level: Level | None = field(default=None, init=False)
    state: FruitState | None = field(default=None, init=False)

    def reset(self, level: Level, episode_seed: int = 0) -> FruitObservation:
        validate_level(level)
        self.level = level
        self.episode_seed = int(episode_seed)
        self.state = FruitState(0, list(level.extras["door_kick_counts"]), 0, False,
                                level.extras["correct_fruit"])
        return self.observe()

    def get_state(self) -> FruitState:
        return self.state.copy()

    def set_state(self, state: FruitState) -> None:
        self.state = state.copy()

    @property
    def room_count(self) -> int:
        return self.level.extras["room_count"]

    def observe(self) -> FruitObservation:
        s = self.state
        in_fruit_room = s.room == self.room_count
        door_open = (not in_fruit_room) and s.kicks_left[s.room] == 0
        return FruitObservation(s.room, not in_fruit_room, door_open, in_fruit_room)

    def obs_dim(self, level: Level | None = None) -> int:
        return MAX_ROOMS + 1 + 3

    def encode(self, obs: FruitObservation) -> np.ndarray:
        out = np.zeros(MAX_ROOMS + 4)
        out[obs.room] = 1.0
        out[MAX_ROOMS + 1] = float(obs.door_present)
        out[MAX_ROOMS + 2] = float(obs.door_open)
        out[MAX_ROOMS + 3] = float(obs.fruit_visible)
        return out

    def step(self, action: int) -> StepResult:
        s = self.state
        if s.done:
            raise EpisodeDone("step called after the episode terminated")
        s.t += 1
        action = int(action)
        in_fruit_room = s.room == self.room_count
        reward = 0.0
        if action == KICK and not in_fruit_room and s.kicks_left[s.room] > 0:
            s.kicks_left[s.room] -= 1
        elif action == MOVE and not in_fruit_room and s.kicks_left[s.room] == 0:
            s.room += 1
        elif action in (EAT_APPLE, EAT_BANANA) and in_fruit_room:
            s.ate = APPLE if action == EAT_APPLE else BANANA
            s.done = True
            if s.ate == s.correct_fruit:
                reward = self.r_apple if s.ate == APPLE else self.r_banana
        if not s.done and s.t >= self.t_max:
            s.done = True
        return StepResult(self.observe(), reward, s.done,
                          {"reached_goal": s.ate is not None and s.ate == s.correct_fruit,
                           "ate_fruit": s.ate})
