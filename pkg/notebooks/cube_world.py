"""
Exploring the cube world
========================

Random walk against BonusMaxRL and WaypointRL in the 6x10x10x6 cube chain,
printed as top-view coverage maps. Shortened budgets by default; pass the
episode count as the first argument (5000 matches the acceptance run).
"""

# %%
import sys

import numpy as np

from rlexplore.agents import BonusMaxAgent, RandomAgent, WaypointAgent
from rlexplore.core import Annotator, RunConfig, run_experiment
from rlexplore.cube import CubeConfig, CubeWorld, cube_coverage, cube_waypoints, top_view

episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
cfg = CubeConfig()
print(cfg.shape, cfg.total_states, "states; doors at", cfg.doors)

# %%
# one trial per agent, same seed
preds = cube_waypoints((1, 2, 3))
runs = {}
for name, agent, ann in [
    ("Random", RandomAgent(), None),
    ("BonusMaxRL", BonusMaxAgent(alpha=0.3, gamma=0.99, epsilon=0.05), None),
    ("WaypointRL", WaypointAgent(preds, one_time=True), Annotator(preds, True)),
]:
    env = CubeWorld(cfg)
    run_experiment(env, agent, RunConfig(episodes, 80, seed=1), ann, keep_records=False)
    runs[name] = env.visits

# %%
for name, visits in runs.items():
    per_cube = [round(cube_coverage(visits, g), 2) for g in range(cfg.cubes)]
    print(f"{name:11s} cells {np.count_nonzero(visits):5d}  coverage per cube {per_cube}")

# %%
# top view of cube 3: digit = number of distinct depths visited in that column
shades = " 123456789"
for name, visits in runs.items():
    print(f"\n{name}, cube 3")
    for row in top_view(visits)[3]:
        print("  " + "".join(shades[min(v, 9)] for v in row))
