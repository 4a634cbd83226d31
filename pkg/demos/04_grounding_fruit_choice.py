"""Curriculum-induced covariate shift on the fruit-choice task.

Which fruit pays off is hidden: apple with probability 0.7 (reward 3),
otherwise banana (reward 10), so always choosing banana is optimal.  A
replay curriculum that favours high-regret levels trains on a skewed
fruit distribution, far from the 0.7 apple prior.  SAMPLR keeps the
curriculum but resamples the hidden fruit from its true posterior inside
fictitious transitions; naive grounding simply redraws it from the prior
at every episode.  Compare the apple rates each student trains on.

    python demos/04_grounding_fruit_choice.py [--iterations 1000]
"""

import argparse

import numpy as np

from deskued.buffer import ReplayConfig
from deskued.curricula import CurriculumConfig, PolicyConfig, make_trainer, run_iteration
from deskued.envs import EAT_APPLE, EAT_BANANA
from deskued.envs.generators import DomainConfig, sample_dr_level
from deskued.ppo import PPOConfig
from deskued.rollout import policy_actor, run_episode

ap = argparse.ArgumentParser()
ap.add_argument("--iterations", type=int, default=1000)
args = ap.parse_args()

fruit = DomainConfig(kind="fruit_choice", min_rooms=0, max_rooms=1)
oracle = max(fruit.r_apple * fruit.q_apple, fruit.r_banana * (1 - fruit.q_apple))
print(f"optimal expected return: {oracle:.1f}")


def banana_rate(state, episodes=300):
    rng = np.random.default_rng(123)
    actor = policy_actor(state.student.params, greedy=False)
    picks = []
    for k in range(episodes):
        level = sample_dr_level("fruit_choice", fruit, rng)
        _, _, acts = run_episode(state.env, level, actor, rng, state.policy.frames, k)
        if acts[-1] in (EAT_APPLE, EAT_BANANA):
            picks.append(acts[-1] == EAT_BANANA)
    return float(np.mean(picks)) if picks else float("nan")


for mode, label in (("none", "ungrounded robust PLR"), ("naive", "naive grounding"),
                    ("samplr", "SAMPLR")):
    state = make_trainer(fruit, CurriculumConfig(kind="samplr", grounding=mode), PPOConfig(),
                         ReplayConfig(), PolicyConfig(), 0)
    rows = [run_iteration(state) for _ in range(args.iterations)]
    apple = [r["train_apple_rate"] for r in rows if r["d"] == 1 and r["train_eat_events"]]
    print(f"{label:22s} banana choice {banana_rate(state):.2f}   "
          f"apple rate seen in training {np.mean(apple):.2f} (var {np.var(apple):.3f})")
