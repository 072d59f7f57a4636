"""Oracles and scenario builders shared by the test modules."""

import itertools

import numpy as np

from iftdeduce.core import PdrReport, expected_pdr
from iftdeduce.simulator import Topology, random_geometric_topology


def make_reports(paths, pdrs, start=1):
    return [PdrReport(start + i, frozenset(p), float(q)) for i, (p, q) in enumerate(zip(paths, pdrs))]


def consistent_reports(paths, g, start=1):
    return make_reports(paths, [expected_pdr(p, g) for p in paths], start)


def brute_force_d(paths, pdrs, n, floor=1e-4):
    """Minimise the log-domain least-squares objective by grid search + zooming.

    Works in ``d`` space on ``(0, 1]`` per node, independent of any linear
    algebra.  Nodes on no path come back as 1.
    """
    A = np.zeros((len(paths), n))
    for i, p in enumerate(paths):
        A[i, list(p)] = 1
    b = -np.log(np.maximum(np.asarray(pdrs, float), floor))
    covered = np.flatnonzero(A.sum(0))
    Ac = A[:, covered]
    m = covered.size

    def objective(D):  # D: (k, m)
        r = (-np.log(D)) @ Ac.T - b
        return (r * r).sum(axis=1)

    lo, hi = 1e-3, 1.0
    axis = np.linspace(lo, hi, 25)
    grid = np.array(list(itertools.product(axis, repeat=m)))
    best = grid[np.argmin(objective(grid))]
    step = axis[1] - axis[0]
    for _ in range(40):
        offsets = np.linspace(-2 * step, 2 * step, 9)
        cand = np.clip(best + np.array(list(itertools.product(offsets, repeat=m))), lo, hi)
        best = cand[np.argmin(objective(cand))]
        step /= 2
    d = np.ones(n)
    d[covered] = best
    return d


def random_simple_path(topo: Topology, rng, max_tries=200):
    """Random walk without revisits between two random endpoints."""
    n = topo.node_count
    for _ in range(max_tries):
        src = int(rng.integers(n))
        path = [src]
        seen = {src}
        length = int(rng.integers(3, n))
        while len(path) < length:
            nbrs = [int(v) for v in topo.neighbors(path[-1]) if v not in seen]
            if not nbrs:
                break
            nxt = nbrs[rng.integers(len(nbrs))]
            path.append(nxt)
            seen.add(nxt)
        if len(path) >= 3:
            return tuple(path)
    raise RuntimeError("could not draw a path")


def well_connected_topology(n=15, start_seed=0):
    """First seeded geometric graph in which every node has degree >= 2."""
    for seed in itertools.count(start_seed):
        topo = random_geometric_topology(n, mean_degree=5.0, seed=seed)
        if topo.adjacency.sum(axis=0).min() >= 2:
            return topo, seed
