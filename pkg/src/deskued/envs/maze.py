"""Partially observable grid mazes, with optional per-tile ice."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..errors import EpisodeDone
from .level import DIRECTIONS, ICY_MAZE, Level, validate_level

TURN_LEFT, TURN_RIGHT, FORWARD = 0, 1, 2

CODE_EMPTY, CODE_WALL, CODE_GOAL, CODE_AGENT = 0, 1, 2, 3


@dataclass
class Observation:
    view: np.ndarray  # int8 cell codes
    facing: int


@dataclass
class StepResult:
    obs: object
    reward: float
    done: bool
    info: dict


@dataclass
class MazeState:
    pos: tuple
    facing: int
    t: int
    done: bool
    ice: np.ndarray
    visited: np.ndarray
    reached_goal: bool = False

    def copy(self) -> "MazeState":
        return MazeState(self.pos, self.facing, self.t, self.done, self.ice.copy(),
                         self.visited.copy(), self.reached_goal)


@dataclass
class MazeEnv:
    """MiniGrid-style navigation: turn left, turn right, move forward.

    ``view="egocentric"`` gives the ``view_size`` square in front of and
    including the agent (agent at the bottom centre); ``view="full"`` gives
    the whole grid with the agent marked.  Ice is never part of either view.
    Moving onto an icy cell slides the agent one further cell if passable.
    """

    view: str = "egocentric"
    view_size: int = 5
    t_max: int = 250
    n_actions: int = 3
    level: Level | None = field(default=None, init=False)
    state: MazeState | None = field(default=None, init=False)

    def reset(self, level: Level, episode_seed: int = 0) -> Observation:
        validate_level(level)
        self.level = level
        self.episode_seed = int(episode_seed)
        self._walls = level.walls
        ice = level.ice.copy() if level.env_kind == ICY_MAZE else np.zeros_like(self._walls)
        visited = np.zeros_like(self._walls)
        visited[level.agent[1], level.agent[0]] = True
        self.state = MazeState(tuple(level.agent), level.facing, 0, False, ice, visited)
        return self.observe()

    def get_state(self) -> MazeState:
        return self.state.copy()

    def set_state(self, state: MazeState) -> None:
        self.state = state.copy()

    # observation -----------------------------------------------------

    def observe(self) -> Observation:
        s = self.state
        if self.view == "full":
            view = np.where(self._walls, CODE_WALL, CODE_EMPTY).astype(np.int8)
            gx, gy = self.level.goal
            view[gy, gx] = CODE_GOAL
            view[s.pos[1], s.pos[0]] = CODE_AGENT
            return Observation(view, s.facing)
        k = self.view_size
        dx, dy = DIRECTIONS[s.facing]
        rx, ry = -dy, dx  # right-hand side of the facing direction
        fwd = (k - 1 - np.arange(k))[:, None]
        lat = (np.arange(k) - k // 2)[None, :]
        xs = s.pos[0] + fwd * dx + lat * rx
        ys = s.pos[1] + fwd * dy + lat * ry
        h, w = self._walls.shape
        inside = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
        xc = np.clip(xs, 0, w - 1)
        yc = np.clip(ys, 0, h - 1)
        view = np.where(inside & ~self._walls[yc, xc], CODE_EMPTY, CODE_WALL).astype(np.int8)
        gx, gy = self.level.goal
        view[(xs == gx) & (ys == gy) & inside] = CODE_GOAL
        return Observation(view, s.facing)

    @property
    def n_codes(self) -> int:
        return 4 if self.view == "full" else 3

    def obs_dim(self, level: Level | None = None) -> int:
        level = level or self.level
        cells = level.width * level.height if self.view == "full" else self.view_size ** 2
        return cells * self.n_codes + 4

    def encode(self, obs: Observation) -> np.ndarray:
        n = self.n_codes
        flat = obs.view.ravel()
        out = np.zeros(flat.size * n + 4)
        out[np.arange(flat.size) * n + flat] = 1.0
        out[flat.size * n + obs.facing] = 1.0
        return out

    # dynamics --------------------------------------------------------

    def _passable(self, x, y) -> bool:
        h, w = self._walls.shape
        return 0 <= x < w and 0 <= y < h and not self._walls[y, x]

    def _enter(self, x, y) -> None:
        self.state.pos = (x, y)
        self.state.visited[y, x] = True

    def step(self, action: int) -> StepResult:
        s = self.state
        if s.done:
            raise EpisodeDone("step called after the episode terminated")
        s.t += 1
        action = int(action)
        if action == TURN_LEFT:
            s.facing = (s.facing - 1) % 4
        elif action == TURN_RIGHT:
            s.facing = (s.facing + 1) % 4
        elif action == FORWARD:
            dx, dy = DIRECTIONS[s.facing]
            nx, ny = s.pos[0] + dx, s.pos[1] + dy
            if self._passable(nx, ny):  # blocked moves stay in place
                self._enter(nx, ny)
                if (nx, ny) != tuple(self.level.goal) and s.ice[ny, nx]:
                    sx, sy = nx + dx, ny + dy
                    if self._passable(sx, sy):
                        self._enter(sx, sy)
        reward = 0.0
        if s.t >= self.t_max:
            s.done = True
        elif s.pos == tuple(self.level.goal):
            s.done = True
            s.reached_goal = True
            reward = 1.0 - 0.9 * (s.t / self.t_max)
        return StepResult(self.observe(), reward, s.done,
                          {"reached_goal": s.reached_goal, "ate_fruit": None})


def shortest_path_length(level: Level) -> int:
    """BFS distance from agent to goal over 4-connected open cells; 0 if unreachable."""
    walls = level.walls
    h, w = walls.shape
    start, goal = tuple(level.agent), tuple(level.goal)
    dist = {start: 0}
    queue = deque([start])
    while queue:
        x, y = queue.popleft()
        for dx, dy in DIRECTIONS:
            nx, ny = x + dx, y + dy
            if 0 <= nx < w and 0 <= ny < h and not walls[ny, nx] and (nx, ny) not in dist:
                dist[(nx, ny)] = dist[(x, y)] + 1
                if (nx, ny) == goal:
                    return dist[(nx, ny)]
                queue.append((nx, ny))
    return 0


def distance_map(walls: np.ndarray, goal) -> np.ndarray:
    """BFS distance of every cell to ``goal`` (-1 where unreachable)."""
    h, w = walls.shape
    dist = np.full((h, w), -1, dtype=int)
    gx, gy = goal
    dist[gy, gx] = 0
    queue = deque([(gx, gy)])
    while queue:
        x, y = queue.popleft()
        for dx, dy in DIRECTIONS:
            nx, ny = x + dx, y + dy
            if 0 <= nx < w and 0 <= ny < h and not walls[ny, nx] and dist[ny, nx] < 0:
                dist[ny, nx] = dist[y, x] + 1
                queue.append((nx, ny))
    return dist
