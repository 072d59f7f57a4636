"""Command line entry point: ``simulate``, ``deduce``, ``sweep`` and ``compare``."""

from __future__ import annotations

import argparse
import math
import sys

from . import harness
from .core import ReportError, read_reports, write_reports
from .engine import PLAIN, REACTIVE, VARIANTS, Engine, EngineConfig
from .harness import ConfigError
from .simulator import TopologyError, run_experiment, write_topology

_SIM_FLAGS = {
    "nodes": int,
    "tau": float,
    "sessions": int,
    "packets": int,
    "concurrency": int,
    "seed": int,
    "loss_baseline_max": float,
    "loss_spike_max": float,
    "loss_spike_prob": float,
    "mean_degree": float,
    "topology_file": str,
}


def _add_sim_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value experiment config file")
    for key, typ in _SIM_FLAGS.items():
        p.add_argument("--" + key.replace("_", "-"), dest=key, type=typ, default=None)


def _add_engine_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--penalty", type=float, default=0.85, help="decision penalty in [0, 1]")
    p.add_argument("--history", type=_history, default=325, help="max retained reports; 'none' for unbounded")
    p.add_argument("--base", type=float, default=math.e)
    p.add_argument("--pdr-floor", type=float, default=1e-4)


def _history(text: str):
    if text.lower() in ("none", "inf", "0"):
        return None
    return int(text)


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _sim_values(args) -> dict:
    values = harness.read_config(args.config) if args.config else {}
    for key in _SIM_FLAGS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return values


def _engine_config(args) -> EngineConfig:
    try:
        return EngineConfig(args.penalty, args.history, args.base, args.pdr_floor)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _echo(title: str, lines) -> None:
    print(f"# {title}")
    for line in lines:
        print(line)
    sys.stdout.flush()


def _engine_lines(cfg: EngineConfig, variant: str | None = None) -> list[str]:
    lines = [
        f"penalty = {cfg.decision_penalty:g}",
        f"history = {cfg.history if cfg.history is not None else 'none'}",
        f"base = {cfg.base!r}",
        f"pdr_floor = {cfg.pdr_floor:g}",
    ]
    if variant:
        lines.insert(0, f"variant = {variant}")
    return lines


def cmd_simulate(args) -> int:
    cfg = harness.experiment_config(_sim_values(args))
    _echo("simulate", harness.config_lines(cfg))
    topo = cfg.topology()
    stream = list(run_experiment(cfg, topo))
    write_reports((r.report for r in stream), args.reports)
    harness.write_truth(stream, args.truth)
    if args.topology_out:
        write_topology(topo, args.topology_out)
    print(f"wrote {len(stream)} reports to {args.reports}, truth trace to {args.truth}")
    return 0


def cmd_deduce(args) -> int:
    cfg = _engine_config(args)
    reports = read_reports(args.reports)
    if not reports:
        raise ConfigError(f"{args.reports}: no reports")
    truth = harness.read_truth(args.truth) if args.truth else None
    n = args.nodes
    if n is None and truth:
        n = next(iter(truth.values())).node_count
    if n is None:
        n = 1 + max((max(r.transit) for r in reports if r.transit), default=0)
    _echo("deduce", [f"nodes = {n}", f"reports = {args.reports}", *_engine_lines(cfg, args.variant)])

    snapshots: list = []
    if truth is not None:
        missing = [r.seq for r in reports if r.seq not in truth]
        if missing:
            raise ConfigError(f"truth trace lacks report seq {missing[0]}")
        stream = [(r, truth[r.seq]) for r in reports]
        records = harness.evaluate_run(stream, cfg, args.variant, snapshots=snapshots)
        if args.timeseries:
            harness.write_timeseries({args.variant: records}, args.timeseries)
    else:
        engine = Engine(n, cfg, args.variant)
        for r in reports:
            snapshots.append((r.seq, engine.process(r), engine.removals))
    harness.write_snapshots(snapshots, args.out)
    print(f"wrote {len(snapshots)} snapshots to {args.out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = harness.experiment_config(_sim_values(args))
    grid = harness.SweepGrid(args.penalties, args.histories)
    _echo(
        "sweep",
        [
            *harness.config_lines(cfg),
            f"penalties = {','.join(f'{p:g}' for p in grid.penalties)}",
            f"histories = {','.join(str(h) for h in grid.histories)}",
            f"runs = {args.runs}",
        ],
    )
    rows = harness.sweep(cfg, grid, args.runs, args.workers)
    harness.write_surface(rows, args.out)
    print(f"wrote {len(rows)} cells to {args.out}")
    return 0


def cmd_compare(args) -> int:
    cfg = harness.experiment_config(_sim_values(args))
    ecfg = _engine_config(args)
    _echo("compare", [*harness.config_lines(cfg), *_engine_lines(ecfg)])
    series = harness.compare_variants(cfg, ecfg)
    harness.write_timeseries(series, args.out)
    for variant in (PLAIN, REACTIVE):
        recs = series[variant]
        mean = sum(r.avg_abs_acc for r in recs) / len(recs)
        print(f"{variant}: run-mean avg |g-d| = {mean:.6f}, removals = {recs[-1].removals}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iftdeduce", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="emit report and ground-truth streams")
    _add_sim_args(p)
    p.add_argument("--reports", default="reports.csv")
    p.add_argument("--truth", default="truth.csv")
    p.add_argument("--topology-out", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("deduce", help="run an engine over a report file")
    p.add_argument("--reports", required=True)
    p.add_argument("--truth", default=None, help="truth trace; enables accuracy output")
    p.add_argument("--nodes", type=int, default=None)
    p.add_argument("--variant", choices=VARIANTS, default=REACTIVE)
    _add_engine_args(p)
    p.add_argument("--out", default="snapshots.csv")
    p.add_argument("--timeseries", default=None)
    p.set_defaults(func=cmd_deduce)

    p = sub.add_parser("sweep", help="penalty x history accuracy surface")
    _add_sim_args(p)
    p.add_argument("--penalties", type=_float_list, default=harness.DEFAULT_PENALTIES)
    p.add_argument("--histories", type=_int_list, default=harness.DEFAULT_HISTORIES)
    p.add_argument("--runs", type=int, default=3)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="surface.csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="reactive vs plain accuracy series")
    _add_sim_args(p)
    _add_engine_args(p)
    p.add_argument("--out", default="timeseries.csv")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, TopologyError, ReportError, ValueError, OSError) as exc:
        print(f"iftdeduce {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
