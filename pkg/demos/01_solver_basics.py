"""
Deducing forwarding behaviour from delivery ratios
==================================================

Three nodes, three two-hop paths, exact delivery ratios.  The log transform
turns the products into a linear system the solver inverts exactly.
"""

import numpy as np

from iftdeduce.core import PdrReport
from iftdeduce.engine import Engine
from iftdeduce.solver import build_system, deduce

# true forwarding probabilities
g = np.array([0.8, 0.9, 0.7])

# each report names the transit nodes of one session and its delivery ratio
paths = [{0, 1}, {1, 2}, {0, 2}]
reports = [PdrReport(i + 1, frozenset(p), float(np.prod(g[sorted(p)]))) for i, p in enumerate(paths)]
for r in reports:
    print(f"report {r.seq}: transit {sorted(r.transit)}  pdr {r.pdr:.3f}")

system = build_system(reports, node_count=3)
print("\nincidence matrix (rows = paths, columns = nodes)")
print(system.matrix.astype(int))
print("right-hand side -ln p:", np.round(system.rhs, 4))

d, coverage = deduce(system)
print("\ndeduced d:", np.round(d, 6), " true g:", g)

# the engine adds per-node error estimates; three paths per node is still
# too few, so every node carries the full penalty
snap = None
engine = Engine(3)
for r in reports:
    snap = engine.process(r)
print("\nerror e :", snap.e)

# repeat the paths a couple of times and the residual branch takes over
for k, r in enumerate(reports * 2, start=4):
    snap = engine.process(PdrReport(k, r.transit, r.pdr))
print("after 9 reports, e:", np.round(snap.e, 6))
print("interval:", np.round(snap.interval, 4).tolist())
