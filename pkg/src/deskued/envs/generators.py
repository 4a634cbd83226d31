"""Level generators: domain randomisation, empty rooms, multi-room chains, perfect mazes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigInvalid, GenerationFailed
from .level import (APPLE, BANANA, FRUIT_CHOICE, ICY_MAZE, MAX_ROOMS, MAZE, Level, empty_walls,
                    make_grid_level)

MAX_RETRIES = 1000


@dataclass
class DomainConfig:
    """Parameters of the ground-truth level distribution for one env kind."""

    kind: str = MAZE
    width: int = 9
    height: int = 9
    wall_budget: int = 15          # DR samples a wall count uniformly from [0, wall_budget]
    q_apple: float = 0.7
    r_apple: float = 3.0
    r_banana: float = 10.0
    min_rooms: int = 0
    max_rooms: int = MAX_ROOMS
    ice_alpha: float = 1.0
    ice_beta: float = 15.0
    t_max: int | None = None       # None: 250 for mazes, 100 for fruit choice
    view: str = "egocentric"
    view_size: int = 5

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.kind not in (MAZE, ICY_MAZE, FRUIT_CHOICE):
            raise ConfigInvalid(f"unknown env kind {self.kind!r}", "env.kind")
        if self.kind != FRUIT_CHOICE:
            if self.width < 5 or self.height < 5:
                raise ConfigInvalid("grid must be at least 5x5", "env.width")
            interior = (self.width - 2) * (self.height - 2)
            if not 0 <= self.wall_budget <= interior - 2:
                raise ConfigInvalid(f"wall_budget must be in [0, {interior - 2}]",
                                    "env.wall_budget")
        if not 0.0 <= self.q_apple <= 1.0:
            raise ConfigInvalid("q_apple must be a probability", "env.q_apple")
        if not 0 <= self.min_rooms <= self.max_rooms <= MAX_ROOMS:
            raise ConfigInvalid("need 0 <= min_rooms <= max_rooms <= 8", "env.max_rooms")
        if self.ice_alpha <= 0 or self.ice_beta <= 0:
            raise ConfigInvalid("Beta prior parameters must be positive", "env.ice_alpha")
        if self.view not in ("egocentric", "full"):
            raise ConfigInvalid("view must be egocentric or full", "env.view")

    @property
    def episode_limit(self) -> int:
        if self.t_max is not None:
            return self.t_max
        return 100 if self.kind == FRUIT_CHOICE else 250


def _new_seed(rng) -> int:
    return int(rng.integers(0, 2**63 - 1))


def _interior_cells(width, height):
    return [(x, y) for y in range(1, height - 1) for x in range(1, width - 1)]


def place_agent_goal(walls: np.ndarray, rng, tries=MAX_RETRIES):
    """Uniform distinct empty cells for agent then goal, resampling on collision."""
    h, w = walls.shape
    free = np.argwhere(~walls)
    if len(free) < 2:
        raise GenerationFailed("fewer than two empty cells")
    agent = tuple(int(v) for v in free[rng.integers(len(free))][::-1])
    for _ in range(tries):
        goal = tuple(int(v) for v in free[rng.integers(len(free))][::-1])
        if goal != agent:
            return agent, goal
    raise GenerationFailed("could not place goal away from agent")


def sample_ice(walls: np.ndarray, alpha: float, beta: float, rng):
    q = float(rng.beta(alpha, beta))
    ice = (rng.random(walls.shape) < q) & ~walls
    return ice, q


def sample_dr_level(env_kind: str, cfg: DomainConfig, rng) -> Level:
    """Sample a level from the domain-randomisation distribution."""
    for _ in range(MAX_RETRIES):
        seed = _new_seed(rng)
        if env_kind == FRUIT_CHOICE:
            rooms = int(rng.integers(cfg.min_rooms, cfg.max_rooms + 1))
            fruit = APPLE if rng.random() < cfg.q_apple else BANANA
            kicks = tuple(int(k) for k in rng.integers(1, 4, size=rooms))
            return Level(FRUIT_CHOICE, seed=seed, extras={
                "room_count": rooms, "correct_fruit": fruit, "door_kick_counts": kicks})
        walls = empty_walls(cfg.width, cfg.height)
        cells = _interior_cells(cfg.width, cfg.height)
        n_walls = int(rng.integers(0, cfg.wall_budget + 1))
        if n_walls:
            for i in rng.choice(len(cells), size=n_walls, replace=False):
                x, y = cells[i]
                walls[y, x] = True
        try:
            agent, goal = place_agent_goal(walls, rng)
        except GenerationFailed:
            continue
        facing = int(rng.integers(4))
        if env_kind == ICY_MAZE:
            ice, q = sample_ice(walls, cfg.ice_alpha, cfg.ice_beta, rng)
            return make_grid_level(walls, agent, goal, facing, seed, ICY_MAZE, ice, q)
        return make_grid_level(walls, agent, goal, facing, seed, MAZE)
    raise GenerationFailed(f"no valid {env_kind} level after {MAX_RETRIES} tries")


def sample_empty_level(env_kind: str, cfg: DomainConfig, rng) -> Level:
    """Border walls only; agent and goal at random distinct cells (no ice)."""
    if env_kind == FRUIT_CHOICE:
        return Level(FRUIT_CHOICE, seed=_new_seed(rng), extras={
            "room_count": 0, "correct_fruit": APPLE if rng.random() < cfg.q_apple else BANANA,
            "door_kick_counts": ()})
    walls = empty_walls(cfg.width, cfg.height)
    agent, goal = place_agent_goal(walls, rng)
    return make_grid_level(walls, agent, goal, int(rng.integers(4)), _new_seed(rng), env_kind)


def multiroom_level(n_rooms: int, rng, room_w=3, room_h=5, max_rooms=4) -> Level:
    """A chain of ``n_rooms`` rooms joined by single-cell doorways.

    The grid always has space for ``max_rooms`` so levels of every room count
    share one shape; unused rooms are filled with wall.  The agent starts in
    the first room and the goal lies in the last one.
    """
    if not 1 <= n_rooms <= max_rooms:
        raise ConfigInvalid(f"n_rooms must be in 1..{max_rooms}", "n_rooms")
    width = max_rooms * (room_w + 1) + 1
    height = room_h + 2
    walls = np.ones((height, width), dtype=bool)
    for r in range(n_rooms):
        x0 = 1 + r * (room_w + 1)
        walls[1:1 + room_h, x0:x0 + room_w] = False
        if r < n_rooms - 1:
            door_y = 1 + int(rng.integers(room_h))
            walls[door_y, x0 + room_w] = False

    def cell_in(r):
        x0 = 1 + r * (room_w + 1)
        return (x0 + int(rng.integers(room_w)), 1 + int(rng.integers(room_h)))

    agent = cell_in(0)
    goal = cell_in(n_rooms - 1)
    while goal == agent:
        goal = cell_in(n_rooms - 1)
    lvl = make_grid_level(walls, agent, goal, int(rng.integers(4)), _new_seed(rng), MAZE)
    return lvl.evolve(extras={"rooms": n_rooms})


def perfect_maze(width: int, height: int, rng) -> Level:
    """Singly connected maze via recursive backtracking over odd cells."""
    if width % 2 == 0 or height % 2 == 0:
        raise ConfigInvalid("perfect mazes need odd dimensions", "width")
    walls = np.ones((height, width), dtype=bool)
    start = (1, 1)
    walls[1, 1] = False
    stack = [start]
    while stack:
        x, y = stack[-1]
        nbrs = [(x + dx, y + dy, dx, dy) for dx, dy in ((2, 0), (-2, 0), (0, 2), (0, -2))
                if 0 < x + dx < width - 1 and 0 < y + dy < height - 1 and walls[y + dy, x + dx]]
        if not nbrs:
            stack.pop()
            continue
        nx, ny, dx, dy = nbrs[rng.integers(len(nbrs))]
        walls[y + dy // 2, x + dx // 2] = False
        walls[ny, nx] = False
        stack.append((nx, ny))
    agent, goal = place_agent_goal(walls, rng)
    return make_grid_level(walls, agent, goal, int(rng.integers(4)), _new_seed(rng), MAZE)


def multiroom_train_set(n_levels: int, rng, max_rooms=4) -> list:
    """Levels with room counts cycling 1..max_rooms (equal mix of difficulties)."""
    return [multiroom_level(1 + i % max_rooms, rng, max_rooms=max_rooms) for i in range(n_levels)]
