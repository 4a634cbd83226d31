"""Edit operators used by evolutionary curricula."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidEdit
from .generators import _new_seed
from .level import (APPLE, BANANA, FRUIT_CHOICE, ICY_MAZE, MAX_ROOMS, Level, grid_to_cells,
                    mask_to_string)

ADD_WALL = "add_wall"
REMOVE_WALL = "remove_wall"
MOVE_GOAL = "move_goal"
TOGGLE_ICE = "toggle_ice"
FLIP_FRUIT = "flip_fruit"
ADD_ROOM = "add_room"
REMOVE_ROOM = "remove_room"

GRID_EDITS = (ADD_WALL, REMOVE_WALL, MOVE_GOAL)
EDIT_KINDS = {
    "maze": GRID_EDITS,
    ICY_MAZE: GRID_EDITS + (TOGGLE_ICE,),
    FRUIT_CHOICE: (FLIP_FRUIT, ADD_ROOM, REMOVE_ROOM),
}


@dataclass(frozen=True)
class EditOp:
    kind: str
    cell: tuple | None = None


def _check_cell(level: Level, cell):
    if cell is None:
        raise InvalidEdit("grid edit needs a cell")
    x, y = cell
    if not (0 <= x < level.width and 0 <= y < level.height):
        raise InvalidEdit(f"cell {cell} out of bounds")
    if x in (0, level.width - 1) or y in (0, level.height - 1):
        raise InvalidEdit(f"cell {cell} is on the border")


def apply_edits(level: Level, edits, rng) -> Level:
    """Apply ``edits`` in order.

    A wall added on the agent or goal displaces it; displaced entities are
    moved to uniformly random empty cells once every edit has been applied.
    """
    edits = list(edits)
    if level.env_kind == FRUIT_CHOICE:
        return _apply_fruit(level, edits, rng)
    allowed = EDIT_KINDS[level.env_kind]
    walls = level.walls.copy()
    ice = level.ice.copy()
    agent, goal = tuple(level.agent), tuple(level.goal)
    displaced = []
    for edit in edits:
        if edit.kind not in allowed:
            raise InvalidEdit(f"{edit.kind} not valid for {level.env_kind}")
        _check_cell(level, edit.cell)
        x, y = edit.cell
        cell = (x, y)
        if edit.kind == ADD_WALL:
            walls[y, x] = True
            ice[y, x] = False
            if cell == agent:
                displaced.append("agent")
                agent = None
            elif cell == goal:
                displaced.append("goal")
                goal = None
        elif edit.kind == REMOVE_WALL:
            walls[y, x] = False
        elif edit.kind == MOVE_GOAL:
            if goal is not None and not walls[y, x] and cell != agent:
                goal = cell
        elif edit.kind == TOGGLE_ICE:
            if not walls[y, x]:
                ice[y, x] = not ice[y, x]
    for name in displaced:
        taken = {c for c in (agent, goal) if c is not None}
        free = [(int(c[1]), int(c[0])) for c in np.argwhere(~walls)]
        free = [c for c in free if c not in taken]
        if not free:
            raise InvalidEdit("no empty cell left to relocate the displaced entity")
        new = free[rng.integers(len(free))]
        if name == "agent":
            agent = new
        else:
            goal = new
    extras = dict(level.extras)
    if level.env_kind == ICY_MAZE:
        extras["ice"] = mask_to_string(ice & ~walls)
    return Level(level.env_kind, level.width, level.height, grid_to_cells(walls), agent,
                 level.facing, goal, level.seed, extras)


def _apply_fruit(level: Level, edits, rng) -> Level:
    extras = dict(level.extras)
    kicks = list(extras["door_kick_counts"])
    for edit in edits:
        if edit.kind == FLIP_FRUIT:
            extras["correct_fruit"] = BANANA if extras["correct_fruit"] == APPLE else APPLE
        elif edit.kind == ADD_ROOM:
            if len(kicks) < MAX_ROOMS:
                kicks.append(int(rng.integers(1, 4)))
        elif edit.kind == REMOVE_ROOM:
            if kicks:
                kicks.pop()
        else:
            raise InvalidEdit(f"{edit.kind} not valid for fruit_choice")
    extras["door_kick_counts"] = tuple(kicks)
    extras["room_count"] = len(kicks)
    return level.evolve(extras=extras)


def apply_edit(level: Level, edit: EditOp, rng) -> Level:
    return apply_edits(level, [edit], rng)


def sample_edit(level: Level, rng, kinds=None) -> EditOp:
    """One random edit.  With ``kinds=None`` a grid edit flips a random interior
    cell (wall <-> open; the goal moves only when a wall displaces it) and, on
    icy mazes, toggles ice with equal probability."""
    if level.env_kind == FRUIT_CHOICE:
        kinds = tuple(kinds or EDIT_KINDS[FRUIT_CHOICE])
        return EditOp(kinds[rng.integers(len(kinds))])
    x = int(rng.integers(1, level.width - 1))
    y = int(rng.integers(1, level.height - 1))
    if kinds is None:
        if level.env_kind == ICY_MAZE and rng.random() < 0.5:
            return EditOp(TOGGLE_ICE, (x, y))
        return EditOp(REMOVE_WALL if level.walls[y, x] else ADD_WALL, (x, y))
    kinds = tuple(kinds)
    return EditOp(kinds[rng.integers(len(kinds))], (x, y))


def mutate(level: Level, n_edits: int, rng, kinds=None) -> Level:
    """``n_edits`` random edits; the child gets a fresh seed (its identity).

    Grid edits are drawn against the parent and a cell is edited at most once.
    """
    edits, cells = [], set()
    for _ in range(n_edits):
        e = sample_edit(level, rng, kinds)
        if e.cell is not None and e.cell in cells:
            continue
        cells.add(e.cell)
        edits.append(e)
    child = apply_edits(level, edits, rng)
    return child.evolve(seed=_new_seed(rng))
