"""Prioritised level store: scores, staleness and the replay distribution."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .envs.level import Level
from .errors import ConfigInvalid, EmptyBuffer
from .scoring import SCORE_KINDS, check_kind

RANK, PROPORTIONAL, GREEDY = "rank", "proportional", "greedy"


@dataclass
class ReplayConfig:
    capacity: int = 4000
    temperature: float = 0.1
    staleness_coef: float = 0.3
    prioritization: str = RANK
    replay_rate: float = 0.5
    anneal: bool = False            # P(replay) = seen / |train set| for finite train sets
    score_kind: str = "positive_value_loss"
    dense_max_mc: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.capacity < 1:
            raise ConfigInvalid("capacity must be >= 1", "replay.capacity")
        if self.temperature <= 0:
            raise ConfigInvalid("temperature must be > 0", "replay.temperature")
        if not 0 <= self.staleness_coef <= 1:
            raise ConfigInvalid("staleness_coef must be in [0, 1]", "replay.staleness_coef")
        if self.prioritization not in (RANK, PROPORTIONAL, GREEDY):
            raise ConfigInvalid("prioritization must be rank, proportional or greedy",
                                "replay.prioritization")
        if not 0 <= self.replay_rate <= 1:
            raise ConfigInvalid("replay_rate must be in [0, 1]", "replay.replay_rate")
        if self.score_kind not in SCORE_KINDS:
            check_kind(self.score_kind)


@dataclass
class BufferEntry:
    level: Level
    score: float
    timestamp: int
    max_return: float
    visit_count: int = 1
    order: int = 0          # insertion stamp, breaks rank ties


def score_distribution(scores, temperature, prioritization=RANK, order=None) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    n = len(scores)
    if n == 0:
        raise EmptyBuffer("no scores")
    if prioritization == GREEDY:
        p = np.zeros(n)
        p[int(np.argmax(scores))] = 1.0
        return p
    if prioritization == RANK:
        order = np.arange(n) if order is None else np.asarray(order)
        idx = np.lexsort((order, -scores))  # descending score, older first on ties
        ranks = np.empty(n)
        ranks[idx] = np.arange(1, n + 1)
        h = 1.0 / ranks
    else:
        h = scores - min(0.0, scores.min()) + 1e-8
    # work in log space; 1/temperature can be large
    logw = np.log(h) / temperature
    w = np.exp(logw - logw.max())
    return w / w.sum()


def staleness_distribution(timestamps, c) -> np.ndarray:
    stale = c - np.asarray(timestamps, dtype=np.float64)
    total = stale.sum()
    if total <= 0:
        return np.full(len(stale), 1.0 / len(stale))
    return stale / total


@dataclass
class LevelBuffer:
    cfg: ReplayConfig
    entries: list = field(default_factory=list)
    _index: dict = field(default_factory=dict, repr=False)
    _stamp: int = 0

    def __len__(self):
        return len(self.entries)

    def __contains__(self, level: Level):
        return level.key in self._index

    @property
    def full(self) -> bool:
        return len(self.entries) >= self.cfg.capacity

    def get(self, level: Level) -> BufferEntry | None:
        i = self._index.get(level.key)
        return None if i is None else self.entries[i]

    @property
    def scores(self) -> np.ndarray:
        return np.array([e.score for e in self.entries])

    def replay_distribution(self, c: int) -> np.ndarray:
        if not self.entries:
            raise EmptyBuffer("replay distribution of an empty buffer")
        p_s = score_distribution(self.scores, self.cfg.temperature, self.cfg.prioritization,
                                 [e.order for e in self.entries])
        p_c = staleness_distribution([e.timestamp for e in self.entries], c)
        rho = self.cfg.staleness_coef
        return (1 - rho) * p_s + rho * p_c

    def min_support_index(self, c: int) -> int:
        return int(np.argmin(self.replay_distribution(c)))

    def min_support_score(self, c: int) -> float:
        return self.entries[self.min_support_index(c)].score

    def sample(self, c: int, rng) -> Level:
        p = self.replay_distribution(c)
        i = int(np.searchsorted(np.cumsum(p), rng.random() * p.sum(), side="right"))
        return self.entries[min(i, len(p) - 1)].level

    def _insert(self, level, score, c, max_return, slot=None):
        entry = BufferEntry(level, float(score), int(c), float(max_return), 1, self._stamp)
        self._stamp += 1
        if slot is None:
            self._index[level.key] = len(self.entries)
            self.entries.append(entry)
        else:
            del self._index[self.entries[slot].level.key]
            self.entries[slot] = entry
            self._index[level.key] = slot

    def update(self, level: Level, score: float, c: int, ret: float | None = None) -> str:
        """Insert/refresh ``level``; returns "updated", "inserted", "replaced" or "rejected".

        A full buffer only admits a new level by evicting the entry of least
        replay support, and only when that entry scores strictly lower.
        """
        score = float(score)
        if not np.isfinite(score):
            raise ValueError(f"score must be finite, got {score}")
        entry = self.get(level)
        if entry is not None:
            entry.score = score
            entry.timestamp = int(c)
            entry.visit_count += 1
            if ret is not None:
                entry.max_return = max(entry.max_return, float(ret))
            return "updated"
        max_return = 0.0 if ret is None else float(ret)
        if not self.full:
            self._insert(level, score, c, max_return)
            return "inserted"
        i = self.min_support_index(c)
        if self.entries[i].score < score:
            self._insert(level, score, c, max_return, slot=i)
            return "replaced"
        return "rejected"

    def admit(self, level: Level, score: float, c: int, ret: float | None = None) -> str:
        """Thresholded insertion for evolved/generated levels.

        The threshold is the min-support score of a full buffer and 0 while
        there is free space; a level already held is always refreshed.
        """
        if level not in self and not self.full and not score > 0.0:
            return "rejected"
        return self.update(level, score, c, ret)

    def record_return(self, level: Level, ret: float) -> None:
        entry = self.get(level)
        if entry is not None:
            entry.max_return = max(entry.max_return, float(ret))

    def max_return(self, level: Level, default=None):
        entry = self.get(level)
        return default if entry is None else entry.max_return

    def mean_score(self) -> float:
        return float(self.scores.mean()) if self.entries else 0.0


def replay_decision(buffer: LevelBuffer, seen_count: int, train_set_size, cfg: ReplayConfig,
                    rng) -> bool:
    """Whether the next level comes from the buffer (True) or the generator."""
    if len(buffer) == 0:
        return False
    if cfg.anneal and train_set_size:
        prob = min(1.0, seen_count / train_set_size)
    else:
        prob = cfg.replay_rate
    return bool(rng.random() < prob)
