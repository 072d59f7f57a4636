"""Accuracy metrics, penalty/history sweeps and reactive-vs-plain comparisons."""

from __future__ import annotations

import csv
import dataclasses
import math
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import DeductionSnapshot, GroundTruth, PdrReport
from .engine import PLAIN, REACTIVE, Engine, EngineConfig
from .simulator import ExperimentConfig, LossProcess, SessionRecord, run_experiment

SNAPSHOT_HEADER = ("report_seq", "node", "d", "e", "lo", "hi", "coverage", "removals_so_far")
TRUTH_HEADER = ("session_seq", "node", "g")
TIMESERIES_HEADER = ("variant", "report_seq", "avg_abs_acc", "max_abs_acc", "avg_e", "removals")
SURFACE_HEADER = ("tau", "penalty", "history", "avg_abs_acc")

DEFAULT_PENALTIES = tuple(round(0.05 * i, 2) for i in range(21))
DEFAULT_HISTORIES = (1,) + tuple(range(25, 551, 25))


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AccuracyRecord:
    report_seq: int
    avg_abs_acc: float
    max_abs_acc: float
    avg_e: float
    removals: int


@dataclass(frozen=True)
class SweepGrid:
    penalties: tuple[float, ...] = DEFAULT_PENALTIES
    histories: tuple[int, ...] = DEFAULT_HISTORIES

    def __post_init__(self):
        if not self.penalties or not self.histories:
            raise ConfigError("sweep grid must have at least one penalty and one history")

    def cells(self):
        for i, p in enumerate(self.penalties):
            for j, h in enumerate(self.histories):
                yield i, j, p, h

    def __len__(self) -> int:
        return len(self.penalties) * len(self.histories)


def observed_nodes(reports: Iterable[PdrReport]) -> np.ndarray:
    """Sorted ids of every node that ever appears as transit."""
    seen = set()
    for r in reports:
        seen |= r.transit
    return np.array(sorted(seen), dtype=int)


def accuracy(snapshot: DeductionSnapshot, truth: GroundTruth, nodes=None) -> tuple[float, float]:
    """Mean and max of ``|g - d|`` over ``nodes`` (all nodes if omitted)."""
    err = np.abs(truth.g - snapshot.d)
    if nodes is not None:
        err = err[nodes]
    if err.size == 0:
        return 0.0, 0.0
    return float(err.mean()), float(err.max())


def evaluate_run(
    stream: Sequence[tuple[PdrReport, GroundTruth]],
    config: EngineConfig,
    variant: str = REACTIVE,
    nodes=None,
    snapshots: list | None = None,
) -> list[AccuracyRecord]:
    """Drive one engine over ``stream`` and score each snapshot against its truth.

    Nodes that never carry transit traffic in the stream are invisible to
    the deduction, so by default the metrics cover only observed nodes.
    Pass ``snapshots`` to collect ``(seq, snapshot, removals)`` tuples.
    """
    stream = [(_report(s), _truth(s)) for s in stream]
    if not stream:
        raise ValueError("empty report stream")
    n = stream[0][1].node_count
    if nodes is None:
        nodes = observed_nodes(r for r, _ in stream)
    engine = Engine(n, config, variant)
    out = []
    for report, truth in stream:
        snap = engine.process(report)
        avg, mx = accuracy(snap, truth, nodes)
        e = snap.e[nodes] if len(nodes) else snap.e
        out.append(AccuracyRecord(report.seq, avg, mx, float(e.mean()), engine.removals))
        if snapshots is not None:
            snapshots.append((report.seq, snap, engine.removals))
    return out


def _report(item) -> PdrReport:
    return item.report if isinstance(item, SessionRecord) else item[0]


def _truth(item) -> GroundTruth:
    return item.truth if isinstance(item, SessionRecord) else item[1]


def steady_state_mean(records: Sequence[AccuracyRecord]) -> float:
    """Mean ``avg_abs_acc`` over the second half of a run."""
    tail = records[len(records) // 2 :]
    return float(np.mean([r.avg_abs_acc for r in tail]))


def run_seed(master_seed: int, run_index: int) -> int:
    return int(np.random.SeedSequence([master_seed, run_index]).generate_state(1)[0])


def simulate(config: ExperimentConfig, scripted_changes=None) -> list[SessionRecord]:
    return list(run_experiment(config, scripted_changes=scripted_changes))


@dataclass(frozen=True)
class ChangeEvent:
    index: int  # position in the stream of the first report under the new truth
    node: int
    old: float
    new: float


def change_events(stream: Sequence[tuple[PdrReport, GroundTruth]]) -> list[ChangeEvent]:
    """Behaviour changes visible between consecutive truth snapshots."""
    out = []
    for i in range(1, len(stream)):
        prev, cur = _truth(stream[i - 1]).g, _truth(stream[i]).g
        for node in np.flatnonzero(prev != cur):
            out.append(ChangeEvent(i, int(node), float(prev[node]), float(cur[node])))
    return out


@dataclass(frozen=True)
class Recovery:
    event: ChangeEvent
    window: tuple[int, ...]  # stream positions of the reports traversing the node
    recovered: dict[str, int | None]  # variant -> first position with max error below threshold


def recovery_after_changes(
    stream: Sequence,
    series: dict[str, Sequence[AccuracyRecord]],
    window: int = 30,
    threshold: float = 0.05,
    min_jump: float = 0.0,
) -> list[Recovery]:
    """For each isolated change, find when each variant's max error dips below ``threshold``.

    The window is the next ``window`` reports whose path crosses the changed
    node.  A change is isolated when no other change lands before its window
    closes; changes smaller than ``min_jump`` are skipped.
    """
    events = change_events(stream)
    starts = [ev.index for ev in events]
    out = []
    for ev in events:
        if abs(ev.new - ev.old) < min_jump:
            continue
        hits = [i for i in range(ev.index, len(stream)) if ev.node in _report(stream[i]).transit][:window]
        if len(hits) < window:
            continue
        others = [s for s, other in zip(starts, events) if other is not ev and ev.index <= s <= hits[-1]]
        if others:
            continue
        recovered = {}
        for variant, records in series.items():
            below = [i for i in hits if records[i].max_abs_acc < threshold]
            recovered[variant] = below[0] if below else None
        out.append(Recovery(ev, tuple(hits), recovered))
    return out


def _sweep_run(args):
    sim_config, grid, run_index = args
    cfg = dataclasses.replace(sim_config, seed=run_seed(sim_config.seed, run_index))
    stream = simulate(cfg)
    nodes = observed_nodes(r.report for r in stream)
    return {
        (i, j): steady_state_mean(evaluate_run(stream, EngineConfig(p, h), REACTIVE, nodes))
        for i, j, p, h in grid.cells()
    }


def sweep(
    sim_config: ExperimentConfig,
    grid: SweepGrid | None = None,
    runs_per_cell: int = 3,
    workers: int = 1,
) -> list[dict]:
    """Steady-state accuracy for every (penalty, history) cell.

    All cells of one run index see the same simulated stream; run ``k``
    draws its stream from seed ``(sim_config.seed, k)``.  Rows come back in
    grid order regardless of ``workers``.
    """
    grid = grid or SweepGrid()
    if runs_per_cell < 1:
        raise ConfigError("runs_per_cell must be positive")
    jobs = [(sim_config, grid, k) for k in range(runs_per_cell)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_run = list(pool.map(_sweep_run, jobs))
    else:
        per_run = [_sweep_run(j) for j in jobs]
    rows = []
    for i, j, p, h in grid.cells():
        rows.append(
            {
                "tau": sim_config.tau,
                "penalty": p,
                "history": h,
                "avg_abs_acc": float(np.mean([run[(i, j)] for run in per_run])),
            }
        )
    return rows


def compare_variants(
    sim_config: ExperimentConfig,
    engine_config: EngineConfig,
    stream: Sequence | None = None,
) -> dict[str, list[AccuracyRecord]]:
    """Run the reactive and plain engines over one shared stream.

    ``stream`` may be given as session records or ``(report, truth)`` pairs;
    by default it is simulated from ``sim_config``.
    """
    if stream is None:
        stream = simulate(sim_config)
    nodes = observed_nodes(_report(r) for r in stream)
    plain_cfg = dataclasses.replace(engine_config, history=None)
    return {
        PLAIN: evaluate_run(stream, plain_cfg, PLAIN, nodes),
        REACTIVE: evaluate_run(stream, engine_config, REACTIVE, nodes),
    }


# -- CSV artifacts ------------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _tau_str(tau: float) -> str:
    return "inf" if math.isinf(tau) else f"{tau:g}"


def _writer(dest):
    return csv.writer(dest, lineterminator="\n")


def _open(dest):
    return open(dest, "w", newline="")


def write_truth(stream: Iterable[SessionRecord], dest) -> None:
    if isinstance(dest, (str, Path)):
        with _open(dest) as fh:
            return write_truth(stream, fh)
    w = _writer(dest)
    w.writerow(TRUTH_HEADER)
    for rec in stream:
        for node, g in enumerate(rec.truth.g):
            w.writerow([rec.report.seq, node, _fmt(g)])


def read_truth(src) -> dict[int, GroundTruth]:
    if isinstance(src, (str, Path)):
        with open(src, newline="") as fh:
            return read_truth(fh)
    reader = csv.reader(src)
    header = next(reader, None)
    if header is None or tuple(header) != TRUTH_HEADER:
        raise ConfigError(f"expected truth header {','.join(TRUTH_HEADER)!r}")
    by_seq: dict[int, dict[int, float]] = {}
    for row in reader:
        if row:
            by_seq.setdefault(int(row[0]), {})[int(row[1])] = float(row[2])
    out = {}
    for seq, vals in by_seq.items():
        n = max(vals) + 1
        out[seq] = GroundTruth([vals[i] for i in range(n)])
    return out


def write_snapshots(rows, dest) -> None:
    """``rows`` is an iterable of ``(report_seq, snapshot, removals_so_far)``."""
    if isinstance(dest, (str, Path)):
        with _open(dest) as fh:
            return write_snapshots(rows, fh)
    w = _writer(dest)
    w.writerow(SNAPSHOT_HEADER)
    for seq, snap, removals in rows:
        iv = snap.interval
        for node in range(snap.node_count):
            w.writerow(
                [
                    seq,
                    node,
                    _fmt(snap.d[node]),
                    _fmt(snap.e[node]),
                    _fmt(iv[node, 0]),
                    _fmt(iv[node, 1]),
                    int(snap.coverage[node]),
                    removals,
                ]
            )


def read_snapshots(src) -> dict[int, DeductionSnapshot]:
    if isinstance(src, (str, Path)):
        with open(src, newline="") as fh:
            return read_snapshots(fh)
    reader = csv.DictReader(src)
    if tuple(reader.fieldnames or ()) != SNAPSHOT_HEADER:
        raise ConfigError(f"expected snapshot header {','.join(SNAPSHOT_HEADER)!r}")
    cols: dict[int, list] = {}
    for row in reader:
        cols.setdefault(int(row["report_seq"]), []).append(
            (int(row["node"]), float(row["d"]), float(row["e"]), int(row["coverage"]))
        )
    out = {}
    for seq, items in cols.items():
        items.sort()
        out[seq] = DeductionSnapshot(
            np.array([x[1] for x in items]), np.array([x[2] for x in items]), np.array([x[3] for x in items])
        )
    return out


def write_timeseries(series: dict[str, Sequence[AccuracyRecord]], dest) -> None:
    if isinstance(dest, (str, Path)):
        with _open(dest) as fh:
            return write_timeseries(series, fh)
    w = _writer(dest)
    w.writerow(TIMESERIES_HEADER)
    for variant, records in series.items():
        for r in records:
            w.writerow([variant, r.report_seq, _fmt(r.avg_abs_acc), _fmt(r.max_abs_acc), _fmt(r.avg_e), r.removals])


def write_surface(rows: Iterable[dict], dest) -> None:
    if isinstance(dest, (str, Path)):
        with _open(dest) as fh:
            return write_surface(rows, fh)
    w = _writer(dest)
    w.writerow(SURFACE_HEADER)
    for row in rows:
        w.writerow([_tau_str(row["tau"]), f"{row['penalty']:g}", row["history"], _fmt(row["avg_abs_acc"])])


# -- experiment config file ---------------------------------------------------

_INT_KEYS = {"nodes", "sessions", "packets", "concurrency", "seed"}
_FLOAT_KEYS = {"tau", "loss_baseline_max", "loss_spike_max", "loss_spike_prob", "mean_degree"}
CONFIG_KEYS = _INT_KEYS | _FLOAT_KEYS | {"topology_file"}


def parse_config_text(text: str, origin: str = "<config>") -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{origin}:{lineno}: unknown key {key!r}")
        try:
            if key in _INT_KEYS:
                out[key] = int(value)
            elif key in _FLOAT_KEYS:
                out[key] = float(value)  # float() accepts "inf"
            else:
                out[key] = value
        except ValueError:
            raise ConfigError(f"{origin}:{lineno}: bad value {value!r} for {key}") from None
    return out


def read_config(path) -> dict:
    return parse_config_text(Path(path).read_text(), str(path))


def experiment_config(values: dict) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from flat config-file keys."""
    loss_defaults = LossProcess()
    try:
        loss = LossProcess(
            values.get("loss_baseline_max", loss_defaults.baseline_max),
            values.get("loss_spike_max", loss_defaults.spike_max),
            values.get("loss_spike_prob", loss_defaults.spike_prob),
        )
        kw = {k: values[k] for k in ("nodes", "tau", "sessions", "packets", "concurrency", "seed", "mean_degree", "topology_file") if k in values}
        return ExperimentConfig(loss=loss, **kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def config_lines(config: ExperimentConfig) -> list[str]:
    """Effective config in the same ``key = value`` form the loader reads."""
    lines = [
        f"nodes = {config.nodes}",
        f"tau = {_tau_str(config.tau)}",
        f"sessions = {config.sessions}",
        f"packets = {config.packets}",
        f"concurrency = {config.concurrency}",
        f"seed = {config.seed}",
        f"loss_baseline_max = {config.loss.baseline_max:g}",
        f"loss_spike_max = {config.loss.spike_max:g}",
        f"loss_spike_prob = {config.loss.spike_prob:g}",
        f"mean_degree = {config.mean_degree:g}",
    ]
    if config.topology_file:
        lines.append(f"topology_file = {config.topology_file}")
    return lines
