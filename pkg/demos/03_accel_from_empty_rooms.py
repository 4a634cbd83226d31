"""ACCEL: complexity compounds from empty rooms.

The buffer starts with wall-free 9x9 rooms.  Each replay step trains on a
buffered level and then edits it (adding or removing walls, moving the
goal); children that score well enough enter the buffer.  Watch the wall
count of buffered levels and the shortest path of solved levels grow.

    python demos/03_accel_from_empty_rooms.py [--iterations 600]
"""

import argparse

import numpy as np

from deskued.buffer import ReplayConfig
from deskued.curricula import CurriculumConfig, PolicyConfig, make_trainer, run_iteration
from deskued.envs import to_ascii
from deskued.envs.generators import DomainConfig
from deskued.metrics import level_stats
from deskued.ppo import PPOConfig

ap = argparse.ArgumentParser()
ap.add_argument("--iterations", type=int, default=600)
ap.add_argument("--seed", type=int, default=0)
args = ap.parse_args()

state = make_trainer(DomainConfig(kind="maze", width=9, height=9),
                     CurriculumConfig(kind="accel", level_source="empty"),
                     PPOConfig(clip_value=True),
                     ReplayConfig(capacity=4000, temperature=0.3, replay_rate=0.8),
                     PolicyConfig(), args.seed)
walls = np.mean([level_stats(e.level)[1] for e in state.buffers[0].entries])
print(f"start: {len(state.buffers[0])} empty rooms, mean walls {walls:.2f}")

rows, block = [], max(args.iterations // 6, 1)
for i in range(args.iterations):
    rows.append(run_iteration(state))
    if (i + 1) % block == 0:
        w = rows[-block:]
        solved = [r["solved_path_length"] for r in w if r["solved_path_length"] != ""]
        print(f"iter {i + 1:4d}  buffer {rows[-1]['buffer_size']:4d}  "
              f"walls {rows[-1]['mean_block_count']:.2f}  "
              f"solved shortest path {np.mean(solved) if solved else float('nan'):.2f}  "
              f"return {np.mean([r['student_return'] for r in w]):.2f}")

deepest = max(state.buffers[0].entries, key=lambda e: level_stats(e.level)[1])
print(f"\nmost walled level in the buffer (score {deepest.score:.3f}):")
print(to_ascii(deepest.level))
