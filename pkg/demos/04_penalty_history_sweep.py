"""
Choosing the decision penalty and history length
================================================

A small sweep over the two reactive-engine knobs on a network whose nodes
change behaviour often.  Every cell sees the same simulated streams.
"""

import numpy as np

from iftdeduce.harness import SweepGrid, sweep
from iftdeduce.simulator import ExperimentConfig

grid = SweepGrid(penalties=(0.05, 0.25, 0.5, 0.85), histories=(25, 100, 325))
rows = sweep(ExperimentConfig(tau=10, sessions=500, seed=7), grid, runs_per_cell=2)

table = np.array([r["avg_abs_acc"] for r in rows]).reshape(len(grid.penalties), len(grid.histories))
print("steady-state mean |g-d|   (rows: penalty, columns: history)")
print("penalty " + "".join(f"{h:>9d}" for h in grid.histories))
for p, line in zip(grid.penalties, table):
    print(f"{p:7.2f} " + "".join(f"{x:9.4f}" for x in line))

best = min(rows, key=lambda r: r["avg_abs_acc"])
print(f"\nbest cell: penalty {best['penalty']}, history {best['history']}")
