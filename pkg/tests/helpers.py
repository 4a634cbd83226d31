"""Shared fixtures for the curriculum and acceptance tests."""

from deskued.buffer import ReplayConfig
from deskued.curricula import CurriculumConfig, PolicyConfig, make_trainer, run_iteration
from deskued.envs.generators import DomainConfig
from deskued.ppo import PPOConfig

SMALL_MAZE = DomainConfig(kind="maze", width=7, height=7, wall_budget=8, t_max=40)
SMALL_ICY = DomainConfig(kind="icy_maze", width=7, height=7, wall_budget=8, t_max=40)
SMALL_PPO = PPOConfig(rollout_length=32, epochs=1, learning_rate=1e-3)
SMALL_POLICY = PolicyConfig(hidden_dims=(16,), frames=2)


def small_trainer(kind, env=SMALL_MAZE, seed=0, replay=None, **cur):
    replay = replay or ReplayConfig(capacity=40, replay_rate=0.5)
    return make_trainer(env, CurriculumConfig(kind=kind, **cur), SMALL_PPO, replay,
                        SMALL_POLICY, seed)


def stop_gradient_audit(state, iterations):
    """Run ``iterations`` steps; count d=0 steps that moved a student and d=1 steps that did not.

    Returns ``(rows, frozen_violations, update_violations)``.
    """
    rows, moved_on_eval, still_on_train = [], 0, 0
    for _ in range(iterations):
        before = [st.params.digest() for st in state.students]
        row = run_iteration(state)
        after = [st.params.digest() for st in state.students]
        changed = [a != b for a, b in zip(before, after)]
        if row["d"] == 0:
            moved_on_eval += any(changed)
        else:
            still_on_train += not all(changed)
        rows.append(row)
    return rows, moved_on_eval, still_on_train
