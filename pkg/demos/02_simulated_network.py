"""
A simulated ad hoc network
==========================

A seeded random geometric graph, shortest-path sessions, per-packet
forwarding and a small end-to-end loss.  Nodes occasionally switch to a new
forwarding probability.
"""

import numpy as np

from iftdeduce.harness import change_events, observed_nodes, simulate
from iftdeduce.simulator import ExperimentConfig

cfg = ExperimentConfig(nodes=15, tau=20, sessions=400, packets=500, seed=3)
topo = cfg.topology()
print(f"{topo.node_count} nodes, {len(topo.edges())} links, mean degree {topo.mean_degree:.2f}")

stream = simulate(cfg)
first = stream[0]
print(f"\nfirst session {first.session.source} -> {first.session.dest} via {first.session.path}")
print(f"  pdr {first.report.pdr:.3f}, exogenous loss {first.session.net_loss:.3f}")

# shortest paths funnel traffic through a few hubs
counts = np.zeros(topo.node_count, int)
for rec in stream:
    counts[sorted(rec.report.transit)] += 1
print("\ntransit load per node:", counts.tolist())
print("never transit:", sorted(set(range(topo.node_count)) - set(observed_nodes(r.report for r in stream))))

lengths = [len(r.report.transit) for r in stream]
print(f"mean transit length {np.mean(lengths):.2f}")

print("\nbehaviour changes:")
for ev in change_events(stream):
    print(f"  report {stream[ev.index].report.seq}: node {ev.node} {ev.old:.3f} -> {ev.new:.3f}")
