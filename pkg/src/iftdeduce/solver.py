"""Log-domain linear system and the nonnegative least-squares deduction.

Taking ``-log_b`` of the path equation turns products of forwarding
probabilities into sums, so every report becomes one row of a linear system
``A @ gt = pt`` with a 0/1 node-path incidence matrix ``A``.  ``gt >= 0`` is
the same constraint as ``d <= 1``.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np

from .core import PdrReport

DEFAULT_BASE = math.e
DEFAULT_PDR_FLOOR = 1e-4
RIDGE_SCALE = 1e-9


def log_transform(p: float, base: float = DEFAULT_BASE, floor: float = DEFAULT_PDR_FLOOR) -> float:
    """Return ``-log_base(max(p, floor))``."""
    if base <= 1:
        raise ValueError("log base must exceed 1")
    if not 0 < floor < 1:
        raise ValueError("pdr floor must lie in (0, 1)")
    return -math.log(max(p, floor)) / math.log(base)


@dataclass(frozen=True)
class IncidenceSystem:
    """Rows are reports with a nonempty transit set, columns are nodes.

    ``pdr`` keeps the clamped observations alongside ``rhs`` so residuals can
    be evaluated in delivery-ratio space without re-reading the reports.
    """

    matrix: np.ndarray
    rhs: np.ndarray
    pdr: np.ndarray
    base: float = DEFAULT_BASE
    pdr_floor: float = DEFAULT_PDR_FLOOR

    def __post_init__(self):
        if self.matrix.ndim != 2:
            raise ValueError("incidence matrix must be 2-D")
        if self.matrix.shape[0] != self.rhs.shape[0] or self.rhs.shape != self.pdr.shape:
            raise ValueError(
                f"dimension mismatch: matrix {self.matrix.shape}, rhs {self.rhs.shape}, pdr {self.pdr.shape}"
            )

    @property
    def node_count(self) -> int:
        return self.matrix.shape[1]

    @property
    def coverage(self) -> np.ndarray:
        return self.matrix.sum(axis=0).astype(int)

    def select(self, rows) -> IncidenceSystem:
        """Sub-system restricted to ``rows`` (boolean mask or index array)."""
        return IncidenceSystem(self.matrix[rows], self.rhs[rows], self.pdr[rows], self.base, self.pdr_floor)


def build_system(
    reports: Iterable[PdrReport],
    node_count: int,
    base: float = DEFAULT_BASE,
    floor: float = DEFAULT_PDR_FLOOR,
) -> IncidenceSystem:
    rows = [r for r in reports if r.transit]
    A = np.zeros((len(rows), node_count))
    if rows:
        lens = [len(r.transit) for r in rows]
        cols = np.fromiter((x for r in rows for x in r.transit), dtype=int, count=sum(lens))
        if cols.max() >= node_count:
            raise ValueError(f"a report names node {cols.max()} but only {node_count} nodes exist")
        A[np.repeat(np.arange(len(rows)), lens), cols] = 1.0
    pdr = np.maximum(np.fromiter((r.pdr for r in rows), dtype=float, count=len(rows)), floor)
    rhs = -np.log(pdr) / math.log(base)
    return IncidenceSystem(A, rhs, pdr, base, floor)


def nnls_gram(G: np.ndarray, c: np.ndarray, maxiter: int | None = None) -> np.ndarray:
    """Active-set NNLS working on the normal equations ``G = A.T A``, ``c = A.T b``.

    Lawson-Hanson iteration in the Bro-de Jong form: the passive set grows by
    the coordinate with the largest positive dual value, and any coordinate
    driven nonpositive by the unconstrained sub-solve is moved back with an
    interpolation step.
    """
    n = c.shape[0]
    if n == 0:
        return np.zeros(0)
    if maxiter is None:
        maxiter = 3 * n + 10
    tol = 10 * np.finfo(float).eps * np.abs(G).sum(axis=0).max() * n
    # a strictly positive unconstrained optimum already satisfies the KKT conditions
    x = np.linalg.solve(G, c)
    if np.all(x > 0):
        return x
    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    w = c - G @ x
    it = 0
    while it < maxiter:
        candidates = ~passive & (w > tol)
        if not candidates.any():
            break
        j = int(np.argmax(np.where(candidates, w, -np.inf)))
        passive[j] = True
        s = _passive_solve(G, c, passive)
        while np.any(s[passive] <= 0):
            it += 1
            bad = passive & (s <= 0)
            alpha = np.min(x[bad] / (x[bad] - s[bad]))
            x = x + alpha * (s - x)
            passive &= x > tol
            x[~passive] = 0.0
            s = _passive_solve(G, c, passive)
        x = s
        w = c - G @ x
        it += 1
    return x


def _passive_solve(G, c, passive):
    s = np.zeros_like(c)
    if passive.any():
        sub = np.ix_(passive, passive)
        s[passive] = np.linalg.solve(G[sub], c[passive])
    return s


@dataclass(frozen=True)
class LogBehavior:
    gtilde: np.ndarray
    coverage: np.ndarray

    @property
    def covered(self) -> np.ndarray:
        return self.coverage > 0


def solve_constrained(system: IncidenceSystem) -> LogBehavior:
    """Minimise ``|A gt - pt|`` over ``gt >= 0``.

    When nodes always appear together the normal equations are singular; a
    ridge of ``1e-9 * trace(A.T A) / n`` on the diagonal then makes them
    solvable and the inseparable nodes split the blame evenly.  Full-rank
    systems are solved without it.  Columns never touched by any row are
    left at 0.
    """
    A, b = system.matrix, system.rhs
    coverage = A.sum(axis=0).astype(int)
    gt = np.zeros(system.node_count)
    cols = np.flatnonzero(coverage)
    if cols.size:
        Ac = A[:, cols]
        G = Ac.T @ Ac
        if np.linalg.matrix_rank(G) < cols.size:
            G[np.diag_indices_from(G)] += RIDGE_SCALE * np.trace(G) / system.node_count
        gt[cols] = nnls_gram(G, Ac.T @ b)
    return LogBehavior(np.maximum(gt, 0.0), coverage)


def to_behavior(logb: LogBehavior, base: float = DEFAULT_BASE) -> np.ndarray:
    """``d = base ** -gt``; uncovered nodes come out as 1."""
    d = np.power(float(base), -logb.gtilde)
    d[~logb.covered] = 1.0
    return d


def deduce(system: IncidenceSystem) -> tuple[np.ndarray, np.ndarray]:
    """Deduced behaviour levels and per-node coverage for ``system``."""
    logb = solve_constrained(system)
    return to_behavior(logb, system.base), logb.coverage


def deduce_reports(reports: Sequence[PdrReport], node_count: int, **kw) -> np.ndarray:
    return deduce(build_system(reports, node_count, **kw))[0]
