"""Level parameterisations and their canonical JSON form."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from ..errors import InvalidLevel

MAZE = "maze"
ICY_MAZE = "icy_maze"
FRUIT_CHOICE = "fruit_choice"
ENV_KINDS = (MAZE, ICY_MAZE, FRUIT_CHOICE)

WALL = "#"
EMPTY = "."

# Facing: 0=East, 1=South, 2=West, 3=North (y grows downward).
DIRECTIONS = ((1, 0), (0, 1), (-1, 0), (0, -1))

APPLE = "apple"
BANANA = "banana"
MAX_ROOMS = 8


@dataclass(frozen=True)
class Level:
    """One concrete environment instance.

    Grid levels store walls as a row-major string of ``#``/``.``; cell
    coordinates are ``(x, y)`` with ``x`` the column.  Env-specific
    parameters (ice mask, fruit identity, door kick counts) live in
    ``extras``, which is treated as immutable.
    """

    env_kind: str
    width: int = 0
    height: int = 0
    cells: str = ""
    agent: tuple | None = None
    facing: int = 0
    goal: tuple | None = None
    seed: int = 0
    extras: dict = field(default_factory=dict)

    def __hash__(self):
        return hash(self.key)

    @cached_property
    def key(self) -> str:
        return to_json(self)

    @cached_property
    def level_id(self) -> str:
        return hashlib.sha1(self.key.encode()).hexdigest()[:12]

    @cached_property
    def walls(self) -> np.ndarray:
        """Boolean ``(height, width)`` wall mask."""
        arr = np.frombuffer(self.cells.encode(), dtype=np.uint8)
        return (arr == ord(WALL)).reshape(self.height, self.width)

    @cached_property
    def ice(self) -> np.ndarray:
        s = self.extras.get("ice", "")
        if not s:
            return np.zeros((self.height, self.width), dtype=bool)
        arr = np.frombuffer(s.encode(), dtype=np.uint8)
        return (arr == ord("1")).reshape(self.height, self.width)

    def is_wall(self, cell) -> bool:
        x, y = cell
        return self.cells[y * self.width + x] == WALL

    @property
    def wall_count(self) -> int:
        """Walls excluding the border."""
        if self.env_kind == FRUIT_CHOICE:
            return 0
        return int(self.walls[1:-1, 1:-1].sum())

    def evolve(self, **changes) -> "Level":
        return replace(self, **changes)


def grid_to_cells(walls: np.ndarray) -> str:
    return "".join(WALL if w else EMPTY for w in np.asarray(walls, dtype=bool).ravel())


def mask_to_string(mask: np.ndarray) -> str:
    return "".join("1" if v else "0" for v in np.asarray(mask, dtype=bool).ravel())


def make_grid_level(walls, agent, goal, facing=0, seed=0, env_kind=MAZE, ice=None,
                    ice_rate=None) -> Level:
    walls = np.asarray(walls, dtype=bool)
    h, w = walls.shape
    extras = {}
    if env_kind == ICY_MAZE:
        ice = np.zeros_like(walls) if ice is None else np.asarray(ice, dtype=bool) & ~walls
        extras = {"ice": mask_to_string(ice),
                  "ice_rate": float(0.0 if ice_rate is None else ice_rate)}
    return Level(env_kind, w, h, grid_to_cells(walls), (int(agent[0]), int(agent[1])),
                 int(facing), (int(goal[0]), int(goal[1])), int(seed), extras)


def empty_walls(width: int, height: int) -> np.ndarray:
    walls = np.zeros((height, width), dtype=bool)
    walls[0, :] = walls[-1, :] = True
    walls[:, 0] = walls[:, -1] = True
    return walls


def from_ascii(rows, env_kind=MAZE, facing=0, seed=0) -> Level:
    """Build a grid level from rows using ``#`` wall, ``.`` empty, ``A`` agent, ``G`` goal."""
    rows = [r for r in rows if r]
    h, w = len(rows), len(rows[0])
    walls = np.zeros((h, w), dtype=bool)
    agent = goal = None
    for y, row in enumerate(rows):
        if len(row) != w:
            raise InvalidLevel(f"ragged row {y}")
        for x, ch in enumerate(row):
            if ch == WALL:
                walls[y, x] = True
            elif ch == "A":
                agent = (x, y)
            elif ch == "G":
                goal = (x, y)
    if agent is None or goal is None:
        raise InvalidLevel("ascii level needs both A and G")
    return make_grid_level(walls, agent, goal, facing=facing, seed=seed, env_kind=env_kind)


def to_ascii(level: Level) -> str:
    rows = []
    for y in range(level.height):
        row = []
        for x in range(level.width):
            if (x, y) == level.agent:
                row.append("A")
            elif (x, y) == level.goal:
                row.append("G")
            else:
                row.append(level.cells[y * level.width + x])
        rows.append("".join(row))
    return "\n".join(rows)


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    if isinstance(v, list):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def level_to_dict(level: Level) -> dict:
    return {
        "env_kind": level.env_kind,
        "width": level.width,
        "height": level.height,
        "cells": level.cells,
        "agent": _plain(level.agent),
        "facing": level.facing,
        "goal": _plain(level.goal),
        "seed": level.seed,
        "extras": _plain(level.extras),
    }


def to_json(level: Level) -> str:
    return json.dumps(level_to_dict(level), sort_keys=True, separators=(",", ":"))


def level_from_dict(d: dict) -> Level:
    try:
        extras = dict(d.get("extras") or {})
        if "door_kick_counts" in extras:
            extras["door_kick_counts"] = tuple(int(k) for k in extras["door_kick_counts"])
        agent = d.get("agent")
        goal = d.get("goal")
        return Level(
            env_kind=d["env_kind"],
            width=int(d.get("width", 0)),
            height=int(d.get("height", 0)),
            cells=d.get("cells", ""),
            agent=None if agent is None else (int(agent[0]), int(agent[1])),
            facing=int(d.get("facing", 0)),
            goal=None if goal is None else (int(goal[0]), int(goal[1])),
            seed=int(d.get("seed", 0)),
            extras=extras,
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise InvalidLevel(f"malformed level record: {exc}") from exc


def from_json(s: str) -> Level:
    return level_from_dict(json.loads(s))


def validate_level(level: Level) -> None:
    """Raise :class:`InvalidLevel` unless every level invariant holds."""
    kind = level.env_kind
    if kind not in ENV_KINDS:
        raise InvalidLevel(f"unknown env_kind {kind!r}")
    if kind == FRUIT_CHOICE:
        rc = level.extras.get("room_count")
        if not isinstance(rc, (int, np.integer)) or not 0 <= rc <= MAX_ROOMS:
            raise InvalidLevel(f"room_count must be in 0..{MAX_ROOMS}, got {rc!r}")
        if level.extras.get("correct_fruit") not in (APPLE, BANANA):
            raise InvalidLevel("correct_fruit must be apple or banana")
        kicks = level.extras.get("door_kick_counts", ())
        if len(kicks) != rc or any(int(k) < 1 for k in kicks):
            raise InvalidLevel("door_kick_counts must hold one positive count per room")
        return
    w, h = level.width, level.height
    if w < 3 or h < 3 or len(level.cells) != w * h or set(level.cells) - {WALL, EMPTY}:
        raise InvalidLevel("malformed grid")
    walls = level.walls
    if not (walls[0].all() and walls[-1].all() and walls[:, 0].all() and walls[:, -1].all()):
        raise InvalidLevel("border cells must be walls")
    if level.agent is None or level.goal is None:
        raise InvalidLevel("agent and goal required")
    for name, (x, y) in (("agent", level.agent), ("goal", level.goal)):
        if not (0 <= x < w and 0 <= y < h) or walls[y, x]:
            raise InvalidLevel(f"{name} must be on an empty in-bounds cell")
    if tuple(level.agent) == tuple(level.goal):
        raise InvalidLevel("agent_start overlaps goal")
    if not 0 <= level.facing < 4:
        raise InvalidLevel("facing must be 0..3")
    if kind == ICY_MAZE:
        ice = level.extras.get("ice", "")
        if len(ice) != w * h or set(ice) - {"0", "1"}:
            raise InvalidLevel("ice mask must cover every cell")
