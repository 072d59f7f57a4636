"""Domain types, the multiplicative path model and the bounded report ledger."""

from __future__ import annotations

import csv
import io
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

REPORT_HEADER = ("seq", "pdr", "packets", "transit")

NodeId = int


class ReportError(ValueError):
    """Raised for malformed reports or out-of-order ledger appends."""


@dataclass(frozen=True)
class PdrReport:
    """One end-to-end delivery report for a completed session.

    ``transit`` holds the intermediate nodes only; source and destination
    never appear in it.
    """

    seq: int
    transit: frozenset[int]
    pdr: float
    packets: int = 1

    def __post_init__(self):
        object.__setattr__(self, "transit", frozenset(int(x) for x in self.transit))
        if not 0.0 <= self.pdr <= 1.0:
            raise ReportError(f"pdr {self.pdr!r} outside [0, 1] (seq {self.seq})")
        if self.packets < 1:
            raise ReportError(f"packets must be positive (seq {self.seq})")
        if any(x < 0 for x in self.transit):
            raise ReportError(f"negative node id in report {self.seq}")

    def touches(self, node: int) -> bool:
        return node in self.transit


@dataclass
class GroundTruth:
    """Per-node forwarding probabilities. Simulator and metrics only."""

    g: np.ndarray

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=float)
        if np.any((self.g < 0) | (self.g > 1)):
            raise ValueError("ground-truth values must lie in [0, 1]")

    @property
    def node_count(self) -> int:
        return self.g.shape[0]

    def copy(self) -> GroundTruth:
        return GroundTruth(self.g.copy())


@dataclass(frozen=True)
class DeductionSnapshot:
    d: np.ndarray
    e: np.ndarray
    coverage: np.ndarray

    @property
    def interval(self) -> np.ndarray:
        """``(n, 2)`` array of ``[lo, hi]`` bounds clipped to ``[0, 1]``."""
        lo = np.maximum(0.0, self.d - self.e)
        hi = np.minimum(1.0, self.d + self.e)
        return np.column_stack([lo, hi])

    @property
    def node_count(self) -> int:
        return self.d.shape[0]


def expected_pdr(transit: Iterable[int], g) -> float:
    """Delivery probability of a path: product of the transit nodes' ``g``.

    An empty transit set delivers everything.
    """
    g = g.g if isinstance(g, GroundTruth) else np.asarray(g, dtype=float)
    idx = sorted(set(transit))
    if not idx:
        return 1.0
    return float(np.prod(g[idx]))


@dataclass
class ReportLedger:
    """Ordered reports, oldest first, bounded by ``capacity``.

    ``capacity=None`` means unbounded (used by the plain least-squares
    baseline).
    """

    capacity: int | None = None
    reports: list[PdrReport] = field(default_factory=list)

    def __post_init__(self):
        if self.capacity is not None and self.capacity < 1:
            raise ValueError("ledger capacity must be a positive integer")

    def __len__(self) -> int:
        return len(self.reports)

    def __iter__(self) -> Iterator[PdrReport]:
        return iter(self.reports)

    @property
    def last_seq(self) -> int | None:
        return self.reports[-1].seq if self.reports else None

    def append(self, report: PdrReport) -> list[PdrReport]:
        """Append ``report`` and evict oldest entries beyond capacity.

        Returns the evicted reports.
        """
        last = self.last_seq
        if last is not None and report.seq <= last:
            raise ReportError(f"report seq {report.seq} is not greater than {last}")
        self.reports.append(report)
        return self.evict()

    def evict(self) -> list[PdrReport]:
        if self.capacity is None or len(self.reports) <= self.capacity:
            return []
        cut = len(self.reports) - self.capacity
        evicted, self.reports = self.reports[:cut], self.reports[cut:]
        return evicted

    def containing(self, node: int) -> list[PdrReport]:
        return [r for r in self.reports if node in r.transit]

    def remove_containing(self, node: int) -> list[PdrReport]:
        """Drop every report whose transit set holds ``node``; return them."""
        kept, removed = [], []
        for r in self.reports:
            (removed if node in r.transit else kept).append(r)
        self.reports = kept
        return removed

    def copy(self) -> ReportLedger:
        return ReportLedger(self.capacity, list(self.reports))


# -- report CSV ---------------------------------------------------------------


def format_report_row(report: PdrReport) -> list[str]:
    transit = ";".join(str(x) for x in sorted(report.transit))
    return [str(report.seq), f"{report.pdr:.6f}", str(report.packets), transit]


def write_reports(reports: Iterable[PdrReport], dest) -> None:
    """Write reports as ``seq,pdr,packets,transit`` CSV to a path or stream."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="") as fh:
            write_reports(reports, fh)
        return
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(REPORT_HEADER)
    for r in reports:
        writer.writerow(format_report_row(r))


def read_reports(src) -> list[PdrReport]:
    if isinstance(src, (str, Path)):
        with open(src, newline="") as fh:
            return read_reports(fh)
    reader = csv.reader(src)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != REPORT_HEADER:
        raise ReportError(f"expected header {','.join(REPORT_HEADER)!r}, got {header!r}")
    out = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 4:
            raise ReportError(f"line {lineno}: expected 4 fields, got {len(row)}")
        seq, pdr, packets, transit = row
        try:
            nodes = frozenset(int(x) for x in transit.split(";") if x.strip())
            out.append(PdrReport(int(seq), nodes, float(pdr), int(packets)))
        except ValueError as exc:
            raise ReportError(f"line {lineno}: {exc}") from None
    return out


def reports_to_csv(reports: Iterable[PdrReport]) -> str:
    buf = io.StringIO()
    write_reports(reports, buf)
    return buf.getvalue()
