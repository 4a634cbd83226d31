"""Rollout collection with frame-stacked observations."""

from __future__ import annotations

import numpy as np

from .policy import PolicyParams, forward, sample_action, softmax
from .ppo import Trajectory


class FrameStack:
    """Concatenation of the last ``k`` encoded observations (oldest first)."""

    def __init__(self, dim: int, k: int):
        self.dim, self.k = dim, k
        self.buf = np.zeros(dim * k)

    def reset(self, x: np.ndarray) -> np.ndarray:
        self.buf = np.tile(x, self.k)
        return self.buf.copy()

    def push(self, x: np.ndarray) -> np.ndarray:
        self.buf = np.concatenate([self.buf[self.dim:], x])
        return self.buf.copy()

    def peek(self, x: np.ndarray) -> np.ndarray:
        """The stack that pushing ``x`` would give, without pushing."""
        return np.concatenate([self.buf[self.dim:], x])


def collect_rollout(env, level, params: PolicyParams, n_steps: int, rng, frames: int = 4,
                    greedy: bool = False, episode_seed: int = 0, reground=None) -> Trajectory:
    """``n_steps`` environment steps on ``level``, resetting after each episode.

    ``reground``, if given, maps ``level`` to the instance played at every
    reset (naive grounding redraws aleatoric parameters per episode).
    """
    dim = env.obs_dim(level)
    stack = FrameStack(dim, frames)
    play = reground or (lambda lv: lv)
    x = stack.reset(env.encode(env.reset(play(level), episode_seed)))
    obs = np.empty((n_steps, dim * frames))
    actions = np.empty(n_steps, dtype=np.int64)
    logps = np.empty(n_steps)
    rewards = np.empty(n_steps)
    values = np.empty(n_steps)
    dones = np.zeros(n_steps, dtype=bool)
    probs = np.empty((n_steps, env.n_actions))
    ep_returns, ep_solved, ep_actions = [], [], []
    cur_ret, cur_actions = 0.0, []
    eats = []
    for t in range(n_steps):
        out = forward(params, x)
        a, lp = sample_action(out, rng, greedy)
        obs[t], actions[t], logps[t], values[t] = x, a, lp, out.value
        probs[t] = softmax(out.logits)
        res = env.step(a)
        rewards[t] = res.reward
        dones[t] = res.done
        cur_ret += res.reward
        cur_actions.append(a)
        if res.done:
            ep_returns.append(cur_ret)
            ep_solved.append(bool(res.info["reached_goal"]))
            ep_actions.append(cur_actions)
            if res.info.get("ate_fruit") is not None:
                eats.append((res.info["ate_fruit"], env.state.correct_fruit))
            cur_ret, cur_actions = 0.0, []
            x = stack.reset(env.encode(env.reset(play(level), episode_seed + len(ep_returns))))
        else:
            x = stack.push(env.encode(res.obs))
    bootstrap = 0.0 if dones[-1] else float(forward(params, x).value)
    info = {"episode_actions": ep_actions or [cur_actions], "eats": eats,
            "partial_return": cur_ret}
    return Trajectory(obs, actions, logps, rewards, values, dones, bootstrap, probs,
                      level_ref=level.level_id, episode_returns=ep_returns,
                      episode_solved=ep_solved, info=info)


def mean_return(traj: Trajectory) -> float:
    """Mean return over finished episodes (the unfinished tail counts if none finished)."""
    if traj.episode_returns:
        return float(np.mean(traj.episode_returns))
    return float(traj.info.get("partial_return", 0.0))


def max_return(traj: Trajectory) -> float:
    if traj.episode_returns:
        return float(np.max(traj.episode_returns))
    return float(traj.info.get("partial_return", 0.0))


def run_episode(env, level, actor, rng, frames: int = 4, episode_seed: int = 0):
    """One episode with ``actor(env, stacked_obs, rng) -> action``.

    Returns ``(return, reached_goal, actions)``.
    """
    dim = env.obs_dim(level)
    stack = FrameStack(dim, frames)
    x = stack.reset(env.encode(env.reset(level, episode_seed)))
    total, actions = 0.0, []
    while True:
        a = actor(env, x, rng)
        res = env.step(a)
        total += res.reward
        actions.append(a)
        if res.done:
            return total, bool(res.info["reached_goal"]), actions
        x = stack.push(env.encode(res.obs))


def policy_actor(params: PolicyParams, greedy: bool = True):
    def act(env, x, rng):
        return sample_action(forward(params, x), rng, greedy)[0]
    return act


def random_actor(env, x, rng):
    return int(rng.integers(env.n_actions))
