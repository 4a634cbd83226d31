"""Learned level designer: places walls one cell per step, then the goal, then the agent."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envs.generators import DomainConfig, _new_seed
from .envs.level import FRUIT_CHOICE, Level, empty_walls, make_grid_level
from .errors import ConfigInvalid
from .policy import Arch, PolicyParams, forward, init_params, sample_action
from .ppo import Optimizer, PPOConfig, Trajectory, make_batch, ppo_update


@dataclass
class DesignEpisode:
    level: Level
    traj: Trajectory      # reward still zero; filled in once the students are evaluated


class LevelGenerator:
    """Feed-forward designer over the interior cells of a fixed-size grid.

    Observation: per interior cell (wall, goal, agent) bits plus a one-hot of
    the design step.  Action: an interior cell.  The first ``budget`` steps
    place walls (placing onto an existing wall is a no-op), the next step the
    goal and the last the agent.  A goal or agent landing on a wall or on the
    other entity is moved to a uniformly random empty cell.
    """

    def __init__(self, cfg: DomainConfig, budget: int, ppo: PPOConfig, rng, hidden=(64, 64)):
        if cfg.kind == FRUIT_CHOICE:
            raise ConfigInvalid("the learned generator only designs grid levels",
                                "curriculum.kind")
        self.cfg = cfg
        self.budget = int(budget)
        self.ppo = ppo
        self.w, self.h = cfg.width - 2, cfg.height - 2
        self.n_cells = self.w * self.h
        self.steps = self.budget + 2
        arch = Arch(3 * self.n_cells + self.steps, tuple(hidden), self.n_cells)
        self.params = init_params(arch, rng)
        self.opt = Optimizer(arch.n_params, ppo)
        self.updates = 0

    def _encode(self, walls, goal, agent, step):
        x = np.zeros(3 * self.n_cells + self.steps)
        x[: self.n_cells] = walls[1:-1, 1:-1].ravel()
        if goal is not None:
            x[self.n_cells + (goal[1] - 1) * self.w + goal[0] - 1] = 1.0
        if agent is not None:
            x[2 * self.n_cells + (agent[1] - 1) * self.w + agent[0] - 1] = 1.0
        x[3 * self.n_cells + step] = 1.0
        return x

    def _cell(self, a):
        return (1 + a % self.w, 1 + a // self.w)

    def design(self, rng) -> DesignEpisode:
        walls = empty_walls(self.cfg.width, self.cfg.height)
        goal = agent = None
        T = self.steps
        obs = np.empty((T, self.params.arch.input_dim))
        actions = np.empty(T, dtype=np.int64)
        logps, values = np.empty(T), np.empty(T)
        for t in range(T):
            x = self._encode(walls, goal, agent, t)
            out = forward(self.params, x)
            a, lp = sample_action(out, rng)
            obs[t], actions[t], logps[t], values[t] = x, a, lp, out.value
            cell = self._cell(a)
            if t < self.budget:
                walls[cell[1], cell[0]] = True
            elif t == self.budget:
                goal = cell if not walls[cell[1], cell[0]] else self._random_free(walls, (), rng)
            else:
                blocked = walls[cell[1], cell[0]] or cell == goal
                agent = self._random_free(walls, (goal,), rng) if blocked else cell
        level = make_grid_level(walls, agent, goal, int(rng.integers(4)), _new_seed(rng),
                                self.cfg.kind)
        dones = np.zeros(T, dtype=bool)
        dones[-1] = True
        traj = Trajectory(obs, actions, logps, np.zeros(T), values, dones, 0.0,
                          level_ref=level.level_id)
        return DesignEpisode(level, traj)

    @staticmethod
    def _random_free(walls, taken, rng):
        free = [(int(c[1]), int(c[0])) for c in np.argwhere(~walls)]
        free = [c for c in free if c not in taken]
        return free[rng.integers(len(free))]

    def update(self, episode: DesignEpisode, reward: float, rng) -> dict:
        """One PPO update on a finished design episode with its terminal reward."""
        episode.traj.rewards[-1] = reward
        episode.traj.episode_returns = [float(reward)]
        batch = make_batch([episode.traj], self.ppo)
        self.params, stats = ppo_update(self.params, batch, self.ppo, rng, self.opt)
        self.updates += 1
        return stats
