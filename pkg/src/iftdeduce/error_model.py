"""Per-node error estimates from path residuals, with a low-coverage penalty."""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np

from .core import PdrReport
from .solver import DEFAULT_PDR_FLOOR, IncidenceSystem, build_system

# Nodes seen on this many paths or fewer get the penalty instead of a residual.
COVERAGE_THRESHOLD = 3

MAX_RESIDUAL = "max_residual"
PENALTY = "penalty"


@dataclass(frozen=True)
class ErrorEstimate:
    e: float
    branch: str
    coverage: int


def predicted_pdr(report: PdrReport, d) -> float:
    if not report.transit:
        return 1.0
    d = np.asarray(d, dtype=float)
    return float(np.prod(d[sorted(report.transit)]))


def residuals(system: IncidenceSystem, d: np.ndarray) -> np.ndarray:
    """``|p_k - p'_k|`` for every row, with ``p'_k`` the product of ``d`` on the path."""
    with np.errstate(divide="ignore"):
        logd = np.log(d)
    # A is 0/1, so A @ log d is the log of the path product; guard d == 0.
    logd = np.where(np.isfinite(logd), logd, -1e300)
    pred = np.exp(system.matrix @ logd)
    return np.abs(system.pdr - pred)


def node_errors(system: IncidenceSystem, d: np.ndarray, penalty: float) -> np.ndarray:
    """Vector of ``e_X`` for all nodes of ``system``."""
    coverage = system.matrix.sum(axis=0)
    e = np.full(system.node_count, float(penalty))
    wide = coverage > COVERAGE_THRESHOLD
    if wide.any():
        r = residuals(system, d)
        on_path = system.matrix[:, wide] > 0
        e[wide] = np.where(on_path, r[:, None], -np.inf).max(axis=0)
    return e


def estimate_error(
    node: int,
    reports: Iterable[PdrReport],
    d,
    penalty: float,
    floor: float = DEFAULT_PDR_FLOOR,
) -> ErrorEstimate:
    """Error estimate for one node from the reports that traverse it.

    Observed ratios are clamped at ``floor`` exactly as the solver sees them.
    """
    relevant = [r for r in reports if node in r.transit]
    k = len(relevant)
    if k <= COVERAGE_THRESHOLD:
        return ErrorEstimate(float(penalty), PENALTY, k)
    worst = max(abs(max(r.pdr, floor) - predicted_pdr(r, d)) for r in relevant)
    return ErrorEstimate(float(worst), MAX_RESIDUAL, k)


def confidence_interval(d: float, e: float) -> tuple[float, float]:
    return max(0.0, d - e), min(1.0, d + e)


def total_error(reports, d, penalty: float, node_count: int | None = None, floor: float = DEFAULT_PDR_FLOOR) -> float:
    """Sum of ``e_X`` over all nodes.

    ``reports`` may be an :class:`IncidenceSystem` or an iterable of reports;
    the latter needs ``node_count`` unless ``d`` already fixes it.
    """
    d = np.asarray(d, dtype=float)
    if isinstance(reports, IncidenceSystem):
        system = reports
    else:
        system = build_system(reports, node_count or d.shape[0], floor=floor)
    return float(node_errors(system, d, penalty).sum())
