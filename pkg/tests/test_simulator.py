import itertools
import math

import numpy as np
import pytest

from iftdeduce.core import GroundTruth
from iftdeduce.simulator import (
    ChangeModel,
    ExperimentConfig,
    LossProcess,
    SessionSpec,
    Topology,
    TopologyError,
    build_topology,
    maybe_change_ift,
    random_geometric_topology,
    read_topology,
    run_experiment,
    run_session,
    select_path,
    write_topology,
)


def all_shortest_paths(topo, s, t):
    """Enumerate simple paths by brute force and keep the shortest ones."""
    n = topo.node_count
    best, found = None, []
    for k in range(0, n - 1):
        for mid in itertools.permutations([v for v in range(n) if v not in (s, t)], k):
            path = (s, *mid, t)
            if all(topo.adjacency[a, b] for a, b in zip(path, path[1:])):
                found.append(path)
        if found:
            return found
    return found


class TestTopology:
    def test_fixed_adjacency_passthrough(self):
        edges = [(0, 1), (1, 2), (2, 3), (3, 0)]
        topo = build_topology("fixed_adjacency", n=4, edges=edges)
        assert sorted(topo.edges()) == sorted(edges[:3] + [(0, 3)])

    def test_random_geometric_is_deterministic_and_connected(self):
        a = build_topology("random_geometric", seed=42, n=15, mean_degree=4.0)
        b = build_topology("random_geometric", seed=42, n=15, mean_degree=4.0)
        assert a.node_count == 15 and a.is_connected()
        np.testing.assert_array_equal(a.adjacency, b.adjacency)

    def test_mean_degree_is_roughly_on_target(self):
        degs = [random_geometric_topology(15, 4.0, seed=s).mean_degree for s in range(30)]
        # connectivity rejection biases upwards a little; boundary effects pull down
        assert 3.0 < np.mean(degs) < 5.5

    def test_two_nodes(self):
        topo = Topology.from_edges(2, [(0, 1)])
        assert select_path(topo, 0, 1) == (0, 1)

    def test_unconnected_budget_exhausted(self):
        with pytest.raises(TopologyError):
            random_geometric_topology(10, radius=0.01, seed=0, max_attempts=5)

    def test_invalid_adjacency(self):
        with pytest.raises(TopologyError):
            Topology(2, np.array([[0, 1], [0, 0]], bool))
        with pytest.raises(TopologyError):
            Topology.from_edges(2, [(0, 0)])

    def test_file_roundtrip(self, tmp_path):
        topo = random_geometric_topology(8, seed=3)
        path = tmp_path / "t.txt"
        write_topology(topo, path)
        back = read_topology(path)
        np.testing.assert_array_equal(back.adjacency, topo.adjacency)

    def test_disconnected_file_rejected(self, tmp_path):
        path = tmp_path / "t.txt"
        path.write_text("4\n0 1\n2 3\n")
        with pytest.raises(TopologyError):
            read_topology(path)


class TestSelectPath:
    def test_adjacent(self):
        topo = Topology.from_edges(3, [(0, 1), (1, 2)])
        assert select_path(topo, 0, 1) == (0, 1)

    def test_line(self):
        topo = Topology.from_edges(3, [(0, 1), (1, 2)])
        assert select_path(topo, 0, 2) == (0, 1, 2)

    def test_square_prefers_smaller_interior(self):
        topo = Topology.from_edges(4, [(0, 3), (3, 2), (0, 1), (1, 2)])
        assert select_path(topo, 0, 2) == (0, 1, 2)
        assert select_path(topo, 2, 0) == (2, 1, 0)

    def test_matches_enumeration_oracle(self):
        for seed in range(5):
            topo = random_geometric_topology(8, 3.0, seed=seed)
            for s, t in itertools.permutations(range(8), 2):
                assert select_path(topo, s, t) == min(all_shortest_paths(topo, s, t))

    def test_same_endpoints_rejected(self):
        with pytest.raises(ValueError):
            select_path(Topology.from_edges(2, [(0, 1)]), 1, 1)


class TestRunSession:
    def test_perfect_network(self, rng):
        rep = run_session(SessionSpec(0, 3, (0, 1, 2, 3), 200, 0.0), np.ones(4), rng)
        assert rep.pdr == 1.0 and rep.transit == frozenset({1, 2})

    def test_two_hop_binomial(self, rng):
        packets = 200_000
        g = GroundTruth([1.0, 0.8, 0.9, 1.0])
        rep = run_session(SessionSpec(0, 3, (0, 1, 2, 3), packets), g, rng)
        sigma = math.sqrt(0.72 * 0.28 / packets)
        assert abs(rep.pdr - 0.72) < 3 * sigma

    def test_direct_link_only_sees_exogenous_loss(self, rng):
        packets = 200_000
        rep = run_session(SessionSpec(0, 1, (0, 1), packets, 0.05), np.ones(2), rng)
        assert rep.transit == frozenset()
        assert abs(rep.pdr - 0.95) < 3 * math.sqrt(0.95 * 0.05 / packets)


class _FixedRng:
    def __init__(self, u):
        self.u = u

    def random(self):
        return self.u

    def uniform(self, lo, hi, size=None):
        return (lo + hi) / 2


class TestChangeModel:
    def test_infinite_tau_never_changes(self, rng):
        model = ChangeModel(math.inf, 15)
        assert model.change_prob == 0.0
        assert all(maybe_change_ift(3, model, set(), rng) is None for _ in range(1000))

    def test_change_probability(self):
        assert ChangeModel(100, 15).change_prob == pytest.approx(1 / 1500)
        assert ChangeModel(50, 15).change_prob == pytest.approx(1 / 750)

    def test_busy_node_never_changes(self):
        model = ChangeModel(1e-9, 15)  # would always fire
        assert maybe_change_ift(3, model, {3}, _FixedRng(0.0)) is None
        assert maybe_change_ift(3, model, {4}, _FixedRng(0.0)) == pytest.approx(0.75)

    def test_bad_parameters(self):
        with pytest.raises(ValueError):
            ChangeModel(0.0)
        with pytest.raises(ValueError):
            ChangeModel(10, behavior_lo=0.8, behavior_hi=0.6)


class TestExperiment:
    def test_determinism(self):
        cfg = ExperimentConfig(tau=20, sessions=150, packets=50, concurrency=3, seed=9)
        a, b = list(run_experiment(cfg)), list(run_experiment(cfg))
        assert [r.report for r in a] == [r.report for r in b]
        assert all((x.truth.g == y.truth.g).all() for x, y in zip(a, b))

    def test_reports_are_sequenced_and_bounded(self):
        cfg = ExperimentConfig(tau=10, sessions=120, packets=20, concurrency=4, seed=1)
        recs = list(run_experiment(cfg))
        assert [r.report.seq for r in recs] == list(range(1, 121))
        assert all(0.5 <= g <= 1.0 for r in recs for g in r.truth.g)
        assert all(r.report.transit == r.session.transit for r in recs)

    def test_noise_free_static_matches_path_equation(self):
        cfg = ExperimentConfig(sessions=300, packets=400, seed=4, loss=LossProcess.none())
        zs = []
        for rec in run_experiment(cfg):
            p = np.prod(rec.truth.g[sorted(rec.report.transit)])
            zs.append((rec.report.pdr - p) / math.sqrt(max(p * (1 - p), 1e-12) / 400) if p < 1 else 0.0)
            if p == 1.0:
                assert rec.report.pdr == 1.0
        zs = np.array(zs)
        assert np.abs(zs).max() < 5
        assert abs(zs.mean()) < 3 / math.sqrt(len(zs))

    def test_loss_process_mean_stays_below_five_percent(self, rng):
        proc = LossProcess(0.03, 0.11, 0.1)
        draws = np.array([proc.draw(rng) for _ in range(20_000)])
        assert draws.mean() < 0.05
        assert draws.max() <= 0.11 and (draws > 0.03).mean() == pytest.approx(0.1, abs=0.01)
        assert proc.mean == pytest.approx(0.9 * 0.015 + 0.1 * 0.07)

    def test_scripted_change(self):
        cfg = ExperimentConfig(sessions=80, packets=10, seed=2)
        recs = list(run_experiment(cfg, scripted_changes={40: (3, 0.55)}))
        assert recs[38].truth.g[3] != 0.55
        assert recs[39].truth.g[3] == 0.55

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(concurrency=5)
        with pytest.raises(ValueError):
            ExperimentConfig(nodes=1)
