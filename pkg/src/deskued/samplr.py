"""Grounding the curriculum's aleatoric parameters to their true distribution.

The curriculum is free to pick any level, including ones whose aleatoric
parameters (per-tile ice, which fruit is correct) are rare under the true
distribution.  Training instead on fictitious transitions, where everything
the agent has not yet observed is redrawn from the true posterior given its
history, keeps the optimal policy that of the true distribution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .envs.fruit import FruitChoiceEnv
from .envs.level import APPLE, BANANA, FRUIT_CHOICE, ICY_MAZE, Level, mask_to_string
from .envs.maze import MazeEnv
from .errors import DoubleCount, StateSyncFailure
from .policy import PolicyParams, forward, sample_action, softmax
from .ppo import Trajectory
from .rollout import FrameStack, collect_rollout

SAMPLR, NAIVE, NONE = "samplr", "naive", "none"


@dataclass
class BeliefPosterior:
    """Beta posterior over a level's ice rate from the tiles seen so far."""

    alpha: float
    beta: float
    n_plus: int = 0
    n_minus: int = 0
    counted: set = field(default_factory=set)

    def observe(self, cell, icy: bool) -> "BeliefPosterior":
        cell = tuple(cell)
        if cell in self.counted:
            raise DoubleCount(f"tile {cell} already counted")
        counted = self.counted | {cell}
        if icy:
            return BeliefPosterior(self.alpha, self.beta, self.n_plus + 1, self.n_minus, counted)
        return BeliefPosterior(self.alpha, self.beta, self.n_plus, self.n_minus + 1, counted)

    @property
    def params(self) -> tuple:
        return self.alpha + self.n_plus, self.beta + self.n_minus

    @property
    def predictive_mean(self) -> float:
        a, b = self.params
        return a / (a + b)

    def sample_rate(self, rng) -> float:
        return float(rng.beta(*self.params))

    @classmethod
    def from_state(cls, alpha, beta, visited: np.ndarray, ice: np.ndarray) -> "BeliefPosterior":
        """Posterior after visiting every cell in ``visited`` (counts only, fast path)."""
        n_plus = int(np.count_nonzero(visited & ice))
        n_minus = int(np.count_nonzero(visited & ~ice))
        return cls(alpha, beta, n_plus, n_minus)


def resample_unvisited(state, walls, belief: BeliefPosterior, rng):
    """Copy of a maze state with every unvisited open tile redrawn i.i.d. from the posterior."""
    q = belief.sample_rate(rng)
    fresh = (rng.random(walls.shape) < q) & ~walls
    new = state.copy()
    new.ice = np.where(state.visited, state.ice, fresh)
    return new, q


def fictitious_transition(primary, fictitious, action, rng, domain):
    """Step a copy of the primary's state whose unseen aleatoric part is redrawn.

    Returns ``(StepResult, fictitious_state_before_step, info)``; the primary
    simulator is left untouched.
    """
    if fictitious.level is None or fictitious.level.key != primary.level.key:
        raise StateSyncFailure("primary and fictitious simulators hold different levels")
    info = _resample_into(primary, fictitious, primary.get_state(), rng, domain)
    before = fictitious.get_state()
    if isinstance(primary, MazeEnv) and before.pos != primary.state.pos:
        raise StateSyncFailure("fictitious state failed to copy the agent position")
    return fictitious.step(action), before, info


def ground_level(level: Level, cfg, rng) -> Level:
    """Naive grounding: redraw the level's aleatoric parameters from the prior."""
    if level.env_kind == FRUIT_CHOICE:
        extras = dict(level.extras)
        extras["correct_fruit"] = APPLE if rng.random() < cfg.q_apple else BANANA
        return level.evolve(extras=extras)
    if level.env_kind == ICY_MAZE:
        walls = level.walls
        q = float(rng.beta(cfg.ice_alpha, cfg.ice_beta))
        ice = (rng.random(walls.shape) < q) & ~walls
        extras = dict(level.extras)
        extras["ice"] = mask_to_string(ice)
        extras["ice_rate"] = q
        return level.evolve(extras=extras)
    return level


def collect_fictitious_rollout(env, fict_env, level, params: PolicyParams, n_steps: int, rng,
                               domain, frames: int = 4, act_on: str = "fictitious",
                               episode_seed: int = 0) -> Trajectory:
    """Rollout whose training transitions come from the fictitious simulator.

    Each step the real state is copied into ``fict_env`` with unseen
    aleatoric values resampled; the action is taken in both simulators.  The
    recorded reward, value and successor value are the fictitious ones, so
    ``delta_t = r'_t + gamma V(s'_{t+1}) - V(s'_t)``.  Real episodes drive
    resets.  ``act_on`` picks whether the action conditions on the
    fictitious or the real observation (they coincide for both envs here,
    since neither observes its aleatoric parameters directly).
    """
    dim = env.obs_dim(level)
    stack = FrameStack(dim, frames)
    x_real = stack.reset(env.encode(env.reset(level, episode_seed)))
    fict_env.reset(level, episode_seed)
    obs = np.empty((n_steps, dim * frames))
    actions = np.empty(n_steps, dtype=np.int64)
    logps, rewards, values, next_values = (np.empty(n_steps) for _ in range(4))
    dones = np.zeros(n_steps, dtype=bool)
    breaks = np.zeros(n_steps, dtype=bool)
    probs = np.empty((n_steps, env.n_actions))
    ep_returns, ep_solved, ep_actions, cur_actions = [], [], [], []
    real_ret, fict_returns, eats, post, fict_rates = 0.0, [], [], [], []
    fict_ret = 0.0
    for t in range(n_steps):
        sinfo = _resample_into(env, fict_env, env.get_state(), rng, domain)
        x_fict = stack.buf.copy()  # fictitious s'_t shares history and current view
        x_fict[-dim:] = fict_env.encode(fict_env.observe())
        x = x_fict if act_on == "fictitious" else x_real
        out = forward(params, x)
        a, lp = sample_action(out, rng)
        obs[t], actions[t], logps[t], values[t] = x, a, lp, out.value
        probs[t] = softmax(out.logits)
        rf = fict_env.step(a)
        rr = env.step(a)
        rewards[t] = rf.reward
        fict_ret += rf.reward
        real_ret += rr.reward
        cur_actions.append(a)
        if "posterior" in sinfo:
            post.append(sinfo["posterior"])
            fict_rates.append(sinfo["fictitious_ice_rate"])
        if rf.done:
            next_values[t] = 0.0
            if rf.info.get("ate_fruit") is not None:
                eats.append((rf.info["ate_fruit"], fict_env.state.correct_fruit))
            fict_returns.append(fict_ret)
            fict_ret = 0.0
        else:
            next_values[t] = float(forward(params, stack.peek(fict_env.encode(rf.obs))).value)
        breaks[t] = rf.done or rr.done
        dones[t] = rr.done
        if rr.done:
            ep_returns.append(real_ret)
            ep_solved.append(bool(rr.info["reached_goal"]))
            ep_actions.append(cur_actions)
            real_ret, cur_actions = 0.0, []
            x_real = stack.reset(env.encode(env.reset(level, episode_seed + len(ep_returns))))
            fict_env.reset(level, episode_seed + len(ep_returns))
        else:
            x_real = stack.push(env.encode(rr.obs))
    info = {"episode_actions": ep_actions or [cur_actions], "eats": eats,
            "partial_return": real_ret, "fictitious_returns": fict_returns}
    if post:
        info["posterior_alpha"] = float(np.mean([p[0] for p in post]))
        info["posterior_beta"] = float(np.mean([p[1] for p in post]))
        info["fictitious_ice_rate"] = float(np.mean(fict_rates))
    if level.env_kind == ICY_MAZE:
        info["real_ice_rate"] = float(level.ice[~level.walls].mean())
    return Trajectory(obs, actions, logps, rewards, values, dones, 0.0, probs, next_values,
                      breaks, level.level_id, ep_returns, ep_solved, info)


def training_rewards(mode, env, fict_env, levels, params: PolicyParams, n_episodes: int, rng,
                     domain, frames: int = 4, n_steps: int = 32) -> np.ndarray:
    """Per-episode returns the learner trains on when replaying ``levels`` under ``mode``.

    ``samplr`` uses fictitious returns, ``naive`` real returns on a level
    whose aleatoric parameters were redrawn from the prior, ``none`` real
    returns on the curated level as is.  Levels are cycled in order.  Only
    the first finished episode of each short rollout is kept, so every
    sample comes from its own grounding draw and the stream is i.i.d.
    """
    out, i = [], 0
    while len(out) < n_episodes:
        level = levels[i % len(levels)]
        i += 1
        if mode == SAMPLR:
            tr = collect_fictitious_rollout(env, fict_env, level, params, n_steps, rng, domain,
                                            frames)
            rets = tr.info["fictitious_returns"]
        else:
            reground = (lambda lv: ground_level(lv, domain, rng)) if mode == NAIVE else None
            rets = collect_rollout(env, level, params, n_steps, rng, frames,
                                   reground=reground).episode_returns
        if rets:
            out.append(rets[0])
    return np.asarray(out, dtype=np.float64)


def _resample_into(env, fict_env, state, rng, domain) -> dict:
    info = {}
    if isinstance(env, FruitChoiceEnv):
        state.correct_fruit = APPLE if rng.random() < domain.q_apple else BANANA
    elif env.level.env_kind == ICY_MAZE:
        belief = BeliefPosterior.from_state(domain.ice_alpha, domain.ice_beta, state.visited,
                                            state.ice)
        state, q = resample_unvisited(state, env._walls, belief, rng)
        info = {"posterior": belief.params, "q": q,
                "fictitious_ice_rate": float(state.ice[~env._walls].mean())}
    fict_env.set_state(state)
    return info


__all__ = ["BeliefPosterior", "NAIVE", "NONE", "SAMPLR", "collect_fictitious_rollout",
           "fictitious_transition", "ground_level", "resample_unvisited", "training_rewards"]
