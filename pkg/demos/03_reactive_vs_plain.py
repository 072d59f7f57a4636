"""
Reacting to a behaviour change
==============================

A node abruptly starts dropping more packets.  The plain least-squares
engine keeps every report and averages old and new behaviour; the reactive
engine may discard the stale reports through that node, and its bounded
history eventually forgets them anyway.
"""

import numpy as np

from iftdeduce.engine import PLAIN, REACTIVE, EngineConfig
from iftdeduce.harness import compare_variants, simulate
from iftdeduce.simulator import ExperimentConfig

cfg = ExperimentConfig(tau=float("inf"), sessions=900, packets=500, seed=0)
stream = simulate(cfg)

# pick the busiest transit node and drop its forwarding probability at session 300
load = np.zeros(cfg.nodes, int)
for rec in stream:
    load[sorted(rec.report.transit)] += 1
node = int(load.argmax())
stream = simulate(cfg, scripted_changes={300: (node, 0.55)})
print(f"node {node}: {stream[0].truth.g[node]:.3f} -> 0.55 at report 300")

for penalty in (0.85, 0.2):
    series = compare_variants(cfg, EngineConfig(penalty, 150), stream)
    print(f"\npenalty {penalty}, history 150")
    print(" report   plain |g-d|   reactive |g-d|")
    for seq in (250, 310, 350, 400, 500, 700, 900):
        p, r = series[PLAIN][seq - 1], series[REACTIVE][seq - 1]
        print(f" {seq:6d}   {p.avg_abs_acc:11.4f}   {r.avg_abs_acc:14.4f}")
    for v in (PLAIN, REACTIVE):
        print(f" {v:8s} run-mean {np.mean([x.avg_abs_acc for x in series[v]]):.4f}, removals {series[v][-1].removals}")
