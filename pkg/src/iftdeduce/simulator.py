"""Session-level network simulator producing PDR reports against a hidden truth.

Sessions run over shortest paths of a static topology.  Each packet is
delivered only if every transit node forwards it (independent Bernoulli
trials with the node's ground-truth probability) and an end-to-end
exogenous loss does not strike.  Nodes may redraw their forwarding
probability when recruited onto a new path while idle.
"""

from __future__ import annotations

import math
from collections import deque
from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import GroundTruth, PdrReport


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class Topology:
    node_count: int
    adjacency: np.ndarray  # symmetric boolean, zero diagonal

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=bool)
        if adj.shape != (self.node_count, self.node_count):
            raise TopologyError("adjacency shape does not match node_count")
        if adj.diagonal().any():
            raise TopologyError("self-loops are not allowed")
        if not (adj == adj.T).all():
            raise TopologyError("adjacency must be symmetric")
        object.__setattr__(self, "adjacency", adj)

    @classmethod
    def from_edges(cls, n: int, edges) -> Topology:
        adj = np.zeros((n, n), dtype=bool)
        for u, v in edges:
            if u == v:
                raise TopologyError(f"self-loop on node {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise TopologyError(f"edge ({u}, {v}) outside 0..{n - 1}")
            adj[u, v] = adj[v, u] = True
        return cls(n, adj)

    def neighbors(self, u: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[u])

    def edges(self) -> list[tuple[int, int]]:
        iu, iv = np.nonzero(np.triu(self.adjacency))
        return list(zip(iu.tolist(), iv.tolist()))

    def hop_distances(self, source: int) -> np.ndarray:
        dist = np.full(self.node_count, -1)
        dist[source] = 0
        queue = deque([source])
        while queue:
            u = queue.popleft()
            for v in self.neighbors(u):
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return dist

    def is_connected(self) -> bool:
        return self.node_count <= 1 or bool((self.hop_distances(0) >= 0).all())

    @property
    def mean_degree(self) -> float:
        return float(self.adjacency.sum() / self.node_count)


def read_topology(path) -> Topology:
    """Parse ``n`` on the first line, then one ``u v`` edge per line."""
    lines = [ln.split("#", 1)[0].strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise TopologyError(f"{path}: empty topology file")
    try:
        n = int(lines[0])
        edges = [tuple(int(tok) for tok in ln.split()) for ln in lines[1:]]
    except ValueError as exc:
        raise TopologyError(f"{path}: {exc}") from None
    if any(len(e) != 2 for e in edges):
        raise TopologyError(f"{path}: every edge line needs exactly two node ids")
    topo = Topology.from_edges(n, edges)
    if not topo.is_connected():
        raise TopologyError(f"{path}: topology is not connected")
    return topo


def write_topology(topo: Topology, path) -> None:
    lines = [str(topo.node_count)] + [f"{u} {v}" for u, v in topo.edges()]
    Path(path).write_text("\n".join(lines) + "\n")


def geometric_radius(n: int, mean_degree: float) -> float:
    """Radius giving roughly ``mean_degree`` neighbours in the unit square."""
    return math.sqrt(mean_degree / ((n - 1) * math.pi))


def random_geometric_topology(
    n: int = 15,
    mean_degree: float = 4.0,
    seed=None,
    radius: float | None = None,
    max_attempts: int = 1000,
) -> Topology:
    """Nodes placed uniformly in the unit square, linked within ``radius``.

    Placements are redrawn from the same generator until the graph is
    connected.
    """
    if n < 1:
        raise TopologyError("need at least one node")
    rng = np.random.default_rng(seed)
    r = radius if radius is not None else geometric_radius(max(n, 2), mean_degree)
    for _ in range(max_attempts):
        pts = rng.random((n, 2))
        d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
        adj = d2 <= r * r
        np.fill_diagonal(adj, False)
        topo = Topology(n, adj)
        if topo.is_connected():
            return topo
    raise TopologyError(f"no connected {n}-node geometric graph after {max_attempts} attempts (radius {r:.3f})")


def build_topology(kind: str = "random_geometric", seed=None, **params) -> Topology:
    if kind == "fixed_adjacency":
        if "path" in params:
            return read_topology(params["path"])
        topo = Topology.from_edges(params["n"], params["edges"])
        if not topo.is_connected():
            raise TopologyError("fixed adjacency is not connected")
        return topo
    if kind == "random_geometric":
        return random_geometric_topology(seed=seed, **params)
    raise TopologyError(f"unknown topology kind {kind!r}")


def select_path(topo: Topology, source: int, dest: int) -> tuple[int, ...]:
    """Minimum-hop path, ties broken toward the lexicographically smallest sequence."""
    if source == dest:
        raise ValueError("source and destination must differ")
    to_dest = topo.hop_distances(dest)
    if to_dest[source] < 0:
        raise TopologyError(f"no route from {source} to {dest}")
    path = [source]
    u = source
    while u != dest:
        # neighbours() is ascending, so the first hop that gets closer is the smallest
        u = next(int(v) for v in topo.neighbors(u) if to_dest[v] == to_dest[u] - 1)
        path.append(u)
    return tuple(path)


def transit_nodes(path) -> frozenset[int]:
    return frozenset(path[1:-1])


# -- behaviour changes --------------------------------------------------------


@dataclass(frozen=True)
class ChangeModel:
    tau: float = math.inf
    node_count: int = 15
    behavior_lo: float = 0.5
    behavior_hi: float = 1.0

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not 0 <= self.behavior_lo <= self.behavior_hi <= 1:
            raise ValueError("need 0 <= behavior_lo <= behavior_hi <= 1")

    @property
    def change_prob(self) -> float:
        if math.isinf(self.tau):
            return 0.0
        return 1.0 / (self.tau * self.node_count)

    def draw(self, rng, size=None):
        return rng.uniform(self.behavior_lo, self.behavior_hi, size)


def maybe_change_ift(node: int, model: ChangeModel, active_transit, rng) -> float | None:
    """New forwarding probability for ``node``, or ``None`` if it keeps its own.

    A node already relaying for an active session never changes.  The coin is
    only tossed for idle nodes, so ``rng`` consumption depends on activity.
    """
    if node in active_transit:
        return None
    p = model.change_prob
    if p == 0.0:
        return None
    if rng.random() < p:
        return float(model.draw(rng))
    return None


# -- exogenous loss -----------------------------------------------------------


@dataclass(frozen=True)
class LossProcess:
    """Per-session loss ratio: mostly low, occasionally a spike."""

    baseline_max: float = 0.05
    spike_max: float = 0.12
    spike_prob: float = 0.1

    def __post_init__(self):
        if not 0 <= self.baseline_max <= self.spike_max < 1:
            raise ValueError("need 0 <= baseline_max <= spike_max < 1")
        if not 0 <= self.spike_prob <= 1:
            raise ValueError("spike_prob must lie in [0, 1]")

    @classmethod
    def none(cls) -> LossProcess:
        return cls(0.0, 0.0, 0.0)

    @property
    def mean(self) -> float:
        base = self.baseline_max / 2
        spike = (self.baseline_max + self.spike_max) / 2
        return (1 - self.spike_prob) * base + self.spike_prob * spike

    def draw(self, rng) -> float:
        if self.spike_max == 0.0:
            return 0.0
        if rng.random() < self.spike_prob:
            return float(rng.uniform(self.baseline_max, self.spike_max))
        return float(rng.uniform(0.0, self.baseline_max))


# -- sessions -----------------------------------------------------------------


@dataclass(frozen=True)
class SessionSpec:
    source: int
    dest: int
    path: tuple[int, ...]
    packets: int = 500
    net_loss: float = 0.0

    @property
    def transit(self) -> frozenset[int]:
        return transit_nodes(self.path)


def run_session(spec: SessionSpec, truth, rng, seq: int = 0) -> PdrReport:
    """Send ``spec.packets`` packets and report the delivered fraction."""
    if spec.packets < 1:
        raise ValueError("a session needs at least one packet")
    g = truth.g if isinstance(truth, GroundTruth) else np.asarray(truth, dtype=float)
    hops = sorted(spec.transit)
    forwarded = (rng.random((spec.packets, len(hops))) < g[hops]).all(axis=1)
    survived = rng.random(spec.packets) >= spec.net_loss
    delivered = int(np.count_nonzero(forwarded & survived))
    return PdrReport(seq, spec.transit, delivered / spec.packets, spec.packets)


@dataclass
class ExperimentConfig:
    nodes: int = 15
    tau: float = math.inf
    sessions: int = 600
    packets: int = 500
    concurrency: int = 1
    seed: int = 0
    loss: LossProcess = field(default_factory=LossProcess)
    mean_degree: float = 4.0
    behavior_lo: float = 0.5
    behavior_hi: float = 1.0
    topology_file: str | None = None

    def __post_init__(self):
        if self.nodes < 2:
            raise ValueError("nodes must be >= 2")
        if self.sessions < 1 or self.packets < 1:
            raise ValueError("sessions and packets must be positive")
        if not 1 <= self.concurrency <= 4:
            raise ValueError("concurrency must be between 1 and 4")

    def topology(self) -> Topology:
        if self.topology_file:
            topo = read_topology(self.topology_file)
            if topo.node_count != self.nodes:
                raise TopologyError(
                    f"topology file has {topo.node_count} nodes but config says {self.nodes}"
                )
            return topo
        topo_seed = np.random.SeedSequence([self.seed, 0])
        return random_geometric_topology(self.nodes, self.mean_degree, seed=topo_seed)

    def change_model(self) -> ChangeModel:
        return ChangeModel(self.tau, self.nodes, self.behavior_lo, self.behavior_hi)


@dataclass(frozen=True)
class SessionRecord:
    report: PdrReport
    truth: GroundTruth
    session: SessionSpec


def run_experiment(
    config: ExperimentConfig,
    topology: Topology | None = None,
    scripted_changes: Mapping[int, tuple[int, float]] | None = None,
) -> Iterator[SessionRecord]:
    """Stream completed sessions in completion order.

    Up to ``config.concurrency`` sessions are open at once.  A new session
    opens, its idle transit nodes get their chance to change behaviour, and
    once the open count reaches the limit the oldest session completes.
    Reports are numbered 1, 2, ... in completion order.

    ``scripted_changes`` maps a 1-based session index to ``(node, new_g)``;
    the change lands when that session opens, or at the first later opening
    at which the node is idle.
    """
    topo = topology or config.topology()
    n = topo.node_count
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1]))
    model = config.change_model()
    g = model.draw(rng, n)
    active: deque[tuple[SessionSpec, np.ndarray]] = deque()
    seq = 0

    def complete():
        nonlocal seq
        spec, g_start = active.popleft()
        seq += 1
        report = run_session(spec, g_start, rng, seq)
        return SessionRecord(report, GroundTruth(g_start), spec)

    pending: list[tuple[int, float]] = []
    for index in range(1, config.sessions + 1):
        src, dst = (int(x) for x in rng.choice(n, size=2, replace=False))
        path = select_path(topo, src, dst)
        busy = set().union(*(s.transit for s, _ in active)) if active else set()
        if scripted_changes and index in scripted_changes:
            pending.append(scripted_changes[index])
        if pending:
            waiting = [(node, val) for node, val in pending if node in busy]
            for node, val in pending:
                if node not in busy:
                    g[node] = val
            pending = waiting
        for node in sorted(transit_nodes(path)):
            new = maybe_change_ift(node, model, busy, rng)
            if new is not None:
                g[node] = new
        spec = SessionSpec(src, dst, path, config.packets, config.loss.draw(rng))
        active.append((spec, g.copy()))
        if len(active) >= config.concurrency:
            yield complete()
    while active:
        yield complete()
