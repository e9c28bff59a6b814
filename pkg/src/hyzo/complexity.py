"""Memory-count bookkeeping: closed-form calculators and trace checks.

Set operations change the (n_g, n_b, n_c) triple in fixed increments, so the
growth of a reach run is predictable from the update set's counts alone.
This module provides the expected-count helpers used to audit traces, plus a
calculator comparing three recipes for covering the bilinear surface
f(x, y) = x y over [-1, 1]^2 with a union-of-polytopes set:

  grid2d   p sample points per axis; the full two-dimensional vertex grid
           with one cell patch per grid square and one slack generator:
           n_g = 2 p^2 + 1, n_b = (p - 1)^2 + 1, n_c = p^2 + 2.
  square1d the quarter-square factoring x y = ((x+y)^2 - (x-y)^2) / 4, each
           square sampled on q points rounded up to an even count
           beta = 2 ceil(q / 2):
           n_g = 2 beta + 4, n_b = beta, n_c = beta + 4.
  strip1d  r sample points along one axis only (two along the other), with
           beta = 2 ceil(r / 4) strips:
           n_g = 4 beta + 1, n_b = beta, n_c = 2 beta + 2.

The case tuples pair the per-recipe resolutions that deliver comparable
approximation accuracy.
"""

from __future__ import annotations

import math

from .sets import ComplexityCount
from .reach import ReachTrace, StateUpdateSet

__all__ = [
    "METHODS",
    "TABLE_CASES",
    "bilinear_counts",
    "bilinear_table",
    "open_successor_counts",
    "closed_successor_counts",
    "RecurrenceReport",
    "verify_trace_recurrence",
]

METHODS = ("grid2d", "square1d", "strip1d")

# (p for grid2d, q for square1d, r for strip1d), matched for accuracy parity.
TABLE_CASES = ((3, 9, 18), (6, 17, 34), (9, 26, 52), (12, 34, 68))


def bilinear_counts(case: tuple[int, int, int], method: str) -> ComplexityCount:
    """Counts for one recipe at one accuracy case."""
    p, q, r = (int(v) for v in case)
    if method == "grid2d":
        return ComplexityCount(2 * p * p + 1, (p - 1) * (p - 1) + 1, p * p + 2)
    if method == "square1d":
        beta = 2 * math.ceil(q / 2)
        return ComplexityCount(2 * beta + 4, beta, beta + 4)
    if method == "strip1d":
        beta = 2 * math.ceil(r / 4)
        return ComplexityCount(4 * beta + 1, beta, 2 * beta + 2)
    raise ValueError(f"unknown method '{method}'; pick one of {METHODS}")


def bilinear_table() -> list[dict]:
    """All cases x methods, ready for printing or JSON."""
    rows = []
    for case in TABLE_CASES:
        for method in METHODS:
            c = bilinear_counts(case, method)
            rows.append({"case": list(case), "method": method,
                         "ng": c.ng, "nb": c.nb, "nc": c.nc})
    return rows


def open_successor_counts(psi: ComplexityCount, r: ComplexityCount,
                          u: ComplexityCount, n_x: int,
                          n_u: int) -> ComplexityCount:
    """Expected counts of one open-loop step.

    The coupling equates the full (x, u) block with R x U, so it appends
    n_x + n_u constraint rows on top of the summed operand counts.
    """
    return ComplexityCount(psi.ng + r.ng + u.ng,
                           psi.nb + r.nb + u.nb,
                           psi.nc + r.nc + u.nc + n_x + n_u)


def closed_successor_counts(phi: ComplexityCount, r: ComplexityCount,
                            n_x: int) -> ComplexityCount:
    """Expected counts of one closed-loop step: n_x extra constraint rows."""
    return ComplexityCount(phi.ng + r.ng, phi.nb + r.nb, phi.nc + r.nc + n_x)


class RecurrenceReport:
    """Per-step audit of a reach trace against the closed-loop recurrence."""

    def __init__(self, rows: list[dict]):
        self.rows = rows

    @property
    def ok(self) -> bool:
        return all(row["match"] for row in self.rows)


def verify_trace_recurrence(trace: ReachTrace, phi: StateUpdateSet | ComplexityCount,
                            n_x: int | None = None) -> RecurrenceReport:
    """Check every step's counts against the closed-loop increments.

    A reduction at step k restarts the base from the hull box (n_x
    generators, no binaries, no constraints) for step k + 1.
    """
    if isinstance(phi, StateUpdateSet):
        if n_x is None:
            n_x = phi.n_x
        phi_counts = phi.set.counts
    else:
        phi_counts = phi
        if n_x is None:
            raise ValueError("n_x is required when passing raw counts")
    reduced = set(trace.reduction_steps)
    rows = []
    base = trace.counts[0]
    for k in range(1, len(trace.counts)):
        expected = closed_successor_counts(phi_counts, base, n_x)
        actual = trace.counts[k]
        rows.append({"step": k, "expected": expected.as_tuple(),
                     "actual": actual.as_tuple(),
                     "match": expected == actual})
        base = ComplexityCount(n_x, 0, 0) if k in reduced else actual
    return RecurrenceReport(rows)
