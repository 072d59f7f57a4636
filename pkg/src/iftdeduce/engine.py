"""Report-driven deduction: the reactive removal loop and the plain baseline."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import DeductionSnapshot, PdrReport, ReportError, ReportLedger
from .error_model import node_errors
from .solver import DEFAULT_PDR_FLOOR, IncidenceSystem, build_system, deduce

REACTIVE = "reactive"
PLAIN = "plain"
VARIANTS = (REACTIVE, PLAIN)

# Penalty attached to low-coverage nodes in every returned snapshot.
REPORTING_PENALTY = 1.0

# Improvements smaller than this are ties.  The ridge used on rank-deficient
# systems leaves residuals around 1e-10 that must not trigger a removal.
REMOVAL_TOLERANCE = 1e-8


@dataclass(frozen=True)
class EngineConfig:
    decision_penalty: float = 0.85
    history: int | None = 325
    base: float = math.e
    pdr_floor: float = DEFAULT_PDR_FLOOR

    def __post_init__(self):
        if not 0.0 <= self.decision_penalty <= 1.0:
            raise ValueError(f"decision_penalty must lie in [0, 1], got {self.decision_penalty}")
        if self.history is not None and self.history < 1:
            raise ValueError(f"history must be >= 1, got {self.history}")
        if self.base <= 1:
            raise ValueError("base must exceed 1")
        if not 0 < self.pdr_floor < 1:
            raise ValueError("pdr_floor must lie in (0, 1)")


@dataclass(frozen=True)
class Removal:
    trigger_seq: int
    node: int
    count: int


@dataclass
class EngineState:
    node_count: int
    ledger: ReportLedger
    last_snapshot: DeductionSnapshot | None = None
    removals_log: list[Removal] = field(default_factory=list)

    @classmethod
    def empty(cls, node_count: int, config: EngineConfig) -> EngineState:
        return cls(node_count, ReportLedger(config.history))


def _system(reports, state: EngineState, config: EngineConfig) -> IncidenceSystem:
    return build_system(reports, state.node_count, config.base, config.pdr_floor)


def _snapshot(system: IncidenceSystem, d: np.ndarray | None = None) -> DeductionSnapshot:
    coverage = system.coverage
    if d is None:
        d = deduce(system)[0]
    e = node_errors(system, d, REPORTING_PENALTY)
    return DeductionSnapshot(d, e, coverage)


def _check(state: EngineState, report: PdrReport) -> None:
    last = state.ledger.last_seq
    if last is not None and report.seq <= last:
        raise ReportError(f"report seq {report.seq} is not greater than {last}")
    if report.transit and max(report.transit) >= state.node_count:
        raise ReportError(f"report {report.seq} names a node outside 0..{state.node_count - 1}")


def process_report(state: EngineState, report: PdrReport, config: EngineConfig):
    """Fold one report into ``state`` with candidate removal of stale paths.

    Each pass deduces over the retained reports plus the new one and scores
    every node of the new report's path by the total error left after
    dropping all retained reports through that node.  The best candidate is
    dropped only if it beats the current total by more than
    ``REMOVAL_TOLERANCE``; otherwise the report
    is accepted, the ledger trimmed to ``history`` and a snapshot returned.
    Ties between candidates go to the lowest node id.

    Returns ``(state, snapshot)``; ``state`` is updated in place.
    """
    _check(state, report)
    penalty = config.decision_penalty
    system = _system([*state.ledger, report], state, config)
    d_orig = deduce(system)[0]
    while True:
        orig_total = node_errors(system, d_orig, penalty).sum()
        best = None
        if report.transit:
            # the new report is the last row and is never removable
            for node in sorted(report.transit):
                keep = system.matrix[:, node] == 0
                keep[-1] = True
                if keep[:-1].all():
                    continue
                cand = system.select(keep)
                d_cand = deduce(cand)[0]
                total = node_errors(cand, d_cand, penalty).sum()
                if best is None or total < best[1]:
                    best = (node, total, cand, d_cand)

        if best is None or best[1] >= orig_total - REMOVAL_TOLERANCE:
            break
        node, _, system, d_orig = best
        removed = state.ledger.remove_containing(node)
        state.removals_log.append(Removal(report.seq, node, len(removed)))

    evicted = state.ledger.append(report)
    if evicted:
        # keep the snapshot consistent with what the ledger actually retains
        dropped_rows = sum(1 for r in evicted if r.transit)
        system = system.select(slice(dropped_rows, None))
        d_orig = None
    snap = _snapshot(system, d_orig)
    state.last_snapshot = snap
    return state, snap


def process_report_plain(state: EngineState, report: PdrReport, config: EngineConfig):
    """Unconditional append followed by a fresh solve over the whole ledger."""
    _check(state, report)
    state.ledger.append(report)
    snap = _snapshot(_system(state.ledger, state, config))
    state.last_snapshot = snap
    return state, snap


class Engine:
    """Stateful wrapper choosing one of the two update rules."""

    def __init__(self, node_count: int, config: EngineConfig | None = None, variant: str = REACTIVE):
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
        self.config = config or EngineConfig()
        self.variant = variant
        self.state = EngineState.empty(node_count, self.config)
        self._step = process_report if variant == REACTIVE else process_report_plain

    @property
    def ledger(self) -> ReportLedger:
        return self.state.ledger

    @property
    def removals(self) -> int:
        return len(self.state.removals_log)

    @property
    def snapshot(self) -> DeductionSnapshot | None:
        return self.state.last_snapshot

    def process(self, report: PdrReport) -> DeductionSnapshot:
        return self._step(self.state, report, self.config)[1]
