"""Underspecified environments and their level machinery."""

from .edits import (ADD_ROOM, ADD_WALL, EDIT_KINDS, FLIP_FRUIT, MOVE_GOAL, REMOVE_ROOM,
                    REMOVE_WALL, TOGGLE_ICE, EditOp, apply_edit, apply_edits, mutate, sample_edit)
from .fruit import EAT_APPLE, EAT_BANANA, KICK, MOVE, FruitChoiceEnv, FruitObservation
from .generators import (DomainConfig, multiroom_level, multiroom_train_set, perfect_maze,
                         sample_dr_level, sample_empty_level)
from .level import (APPLE, BANANA, FRUIT_CHOICE, ICY_MAZE, MAZE, Level, from_ascii, from_json,
                    level_from_dict, level_to_dict, make_grid_level, to_ascii, to_json,
                    validate_level)
from .maze import (FORWARD, TURN_LEFT, TURN_RIGHT, MazeEnv, Observation, StepResult,
                   distance_map, shortest_path_length)


def make_env(cfg: DomainConfig):
    """Environment instance for a domain config."""
    if cfg.kind == FRUIT_CHOICE:
        return FruitChoiceEnv(r_apple=cfg.r_apple, r_banana=cfg.r_banana, t_max=cfg.episode_limit)
    return MazeEnv(view=cfg.view, view_size=cfg.view_size, t_max=cfg.episode_limit)


__all__ = [
    "ADD_ROOM", "ADD_WALL", "APPLE", "BANANA", "DomainConfig", "EAT_APPLE", "EAT_BANANA",
    "EDIT_KINDS", "EditOp", "FLIP_FRUIT", "FORWARD", "FRUIT_CHOICE", "FruitChoiceEnv",
    "FruitObservation", "ICY_MAZE", "KICK", "Level", "MAZE", "MOVE", "MOVE_GOAL", "MazeEnv",
    "Observation", "REMOVE_ROOM", "REMOVE_WALL", "StepResult", "TOGGLE_ICE", "TURN_LEFT",
    "TURN_RIGHT", "apply_edit", "apply_edits", "distance_map", "from_ascii", "from_json",
    "level_from_dict", "level_to_dict", "make_env", "make_grid_level", "multiroom_level",
    "multiroom_train_set", "mutate", "perfect_maze", "sample_dr_level", "sample_edit",
    "sample_empty_level", "shortest_path_length", "to_ascii", "to_json", "validate_level",
]
