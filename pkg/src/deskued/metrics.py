"""Evaluation suites, zero-shot evaluation and level/behaviour complexity metrics."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from .envs.fruit import EAT_APPLE, EAT_BANANA, KICK, MOVE
from .envs.generators import perfect_maze
from .envs.level import DIRECTIONS, FRUIT_CHOICE, Level, from_ascii, level_from_dict
from .envs.maze import FORWARD, TURN_LEFT, TURN_RIGHT, distance_map, shortest_path_length
from .errors import EmptySequence, InvalidLevel
from .rollout import run_episode


# complexity ------------------------------------------------------------

def lzw_complexity(sequence, alphabet=None) -> int:
    """Number of codes emitted by LZW with the dictionary seeded by single symbols."""
    seq = list(sequence)
    if not seq:
        raise EmptySequence("LZW complexity of an empty sequence")
    table = {(s,) for s in (alphabet if alphabet is not None else seq)}
    table.update((s,) for s in seq)
    w = ()
    codes = 0
    for s in seq:
        ws = w + (s,)
        if ws in table:
            w = ws
        else:
            codes += 1
            table.add(ws)
            w = (s,)
    return codes + 1


_STATS_CACHE: dict = {}


def level_stats(level: Level) -> tuple:
    """``(shortest_path_length, interior wall count)`` for grid levels, cached by level."""
    hit = _STATS_CACHE.get(level.key)
    if hit is None:
        if level.env_kind == FRUIT_CHOICE:
            hit = (0, 0)
        else:
            hit = (shortest_path_length(level), level.wall_count)
        if len(_STATS_CACHE) > 200_000:
            _STATS_CACHE.clear()
        _STATS_CACHE[level.key] = hit
    return hit


def complexity_summary(levels) -> dict:
    """Mean wall count, and mean shortest path over the solvable levels."""
    levels = list(levels)
    if not levels or levels[0].env_kind == FRUIT_CHOICE:
        return {"mean_shortest_path": float("nan"), "mean_block_count": float("nan")}
    stats = np.array([level_stats(lv) for lv in levels], dtype=float)
    solvable = stats[stats[:, 0] > 0, 0]
    return {"mean_shortest_path": float(solvable.mean()) if solvable.size else 0.0,
            "mean_block_count": float(stats[:, 1].mean())}


def generalization_gap(train_returns, test_returns) -> float:
    return float(np.mean(train_returns) - np.mean(test_returns))


# suites ------------------------------------------------------------------

def _data_path(name: str) -> Path:
    return Path(str(resources.files("deskued") / "data" / name))


def builtin_suites() -> list:
    return sorted(p.stem for p in _data_path("").glob("*.json"))


def load_suite(spec) -> list:
    """``[(name, Level)]`` from a suite JSON path, a built-in suite name, or a dict."""
    if isinstance(spec, dict):
        data = spec
    else:
        path = Path(spec)
        if not path.exists():
            path = _data_path(f"{spec}.json")
        with open(path) as fh:
            data = json.load(fh)
    out = []
    for item in data.get("levels", []):
        if "ascii" in item:
            lvl = from_ascii(item["ascii"], facing=item.get("facing", 0))
        else:
            lvl = level_from_dict(item["level"])
        out.append((item["name"], lvl))
    proc = data.get("procedural")
    if proc:
        rng = np.random.default_rng(proc.get("seed", 0))
        for i in range(proc["count"]):
            out.append((f"{proc['kind']}_{proc['width']}x{proc['height']}_{i}",
                        perfect_maze(proc["width"], proc["height"], rng)))
    if not out:
        raise InvalidLevel("evaluation suite holds no levels")
    return out


# reference policies -------------------------------------------------------

def oracle_actor(env, x, rng):
    """Shortest-path follower for mazes; eats the correct fruit in fruit choice."""
    s = env.state
    if hasattr(s, "kicks_left"):
        if s.room == env.room_count:
            return EAT_APPLE if s.correct_fruit == "apple" else EAT_BANANA
        return KICK if s.kicks_left[s.room] > 0 else MOVE
    dist = distance_map(env._walls, env.level.goal)
    x0, y0 = s.pos
    here = dist[y0, x0]
    best = None
    for d, (dx, dy) in enumerate(DIRECTIONS):
        nx, ny = x0 + dx, y0 + dy
        if 0 <= ny < dist.shape[0] and 0 <= nx < dist.shape[1] and 0 <= dist[ny, nx] < here:
            best = d
            break
    if best is None:
        return FORWARD
    if best == s.facing:
        return FORWARD
    return TURN_RIGHT if (best - s.facing) % 4 == 1 else TURN_LEFT


def evaluate(actor, suite, env, episodes_per_level: int, rng, frames: int = 4) -> dict:
    """Greedy zero-shot evaluation; per-level solved rate and mean return."""
    per_level = []
    for name, level in suite:
        rets, solved = [], []
        for ep in range(episodes_per_level):
            r, ok, _ = run_episode(env, level, actor, rng, frames, episode_seed=ep)
            rets.append(r)
            solved.append(ok)
        per_level.append({"name": name, "level_id": level.level_id,
                          "solved_rate": float(np.mean(solved)),
                          "mean_return": float(np.mean(rets))})
    rates = [p["solved_rate"] for p in per_level]
    rets = [p["mean_return"] for p in per_level]
    return {"levels": per_level,
            "aggregate": {"mean_solved_rate": float(np.mean(rates)),
                          "median_solved_rate": float(np.median(rates)),
                          "mean_return": float(np.mean(rets)),
                          "median_return": float(np.median(rets))}}


def report_csv(report: dict) -> str:
    lines = ["name,level_id,solved_rate,mean_return"]
    for p in report["levels"]:
        lines.append(f"{p['name']},{p['level_id']},{p['solved_rate']!r},{p['mean_return']!r}")
    return "\n".join(lines) + "\n"
