"""Dense bounded-variable linear programming by two-phase simplex.

Solves   maximize c @ x   subject to   A @ x = b,  lo <= x <= hi
with finite bounds on every structural variable.

Pivoting is deterministic. The default pricing picks the most violating
reduced cost (ties broken by smallest index) and switches to Bland's
rule whenever a run of degenerate steps is detected, which restores the
anti-cycling guarantee; pricing="bland" forces Bland's rule throughout.
Identical inputs therefore produce identical pivot sequences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class LpInfeasible(Exception):
    """The constraint system admits no point within bounds."""


@dataclass(frozen=True)
class LpProblem:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2:
            raise ValueError("A must be 2-D")
        b = np.asarray(self.b, dtype=float).ravel()
        lo = np.asarray(self.lo, dtype=float).ravel()
        hi = np.asarray(self.hi, dtype=float).ravel()
        n = c.size
        if A.shape != (b.size, n):
            raise ValueError(f"A has shape {A.shape}, expected {(b.size, n)}")
        if lo.size != n or hi.size != n:
            raise ValueError("bound vectors must match variable count")
        if np.any(hi < lo):
            raise LpInfeasible("crossed variable bounds")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("bounds must be finite")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", np.ascontiguousarray(A, dtype=float))
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)


@dataclass(frozen=True)
class LpSolution:
    value: float
    x: np.ndarray
    pivots: tuple[int, ...] = ()


_AT_LOWER = 0
_AT_UPPER = 1
_BASIC = 2
_REFACTOR_EVERY = 64
_STALL_LIMIT = 25


class _Tableau:
    """Revised simplex state over the bounded problem plus artificials."""

    def __init__(self, A, b, lo, hi, tol):
        m, n = A.shape
        self.m, self.n = m, n
        self.tol = tol
        x0 = lo.copy()
        r = b - A @ x0
        sign = np.where(r >= 0.0, 1.0, -1.0)
        # artificial j has column sign[j] * e_j so its initial value |r_j| >= 0
        self.A = np.hstack([A, np.diag(sign)])
        self.b = b
        self.lo = np.concatenate([lo, np.zeros(m)])
        # generous rather than infinite artificial upper bounds; phase 1 only
        # ever drives them toward zero
        self.hi = np.concatenate([hi, np.abs(r) + 1.0])
        self.total = n + m
        self.status = np.full(self.total, _AT_LOWER, dtype=np.int8)
        self.basis = np.arange(n, n + m)
        self.status[self.basis] = _BASIC
        self.x = np.concatenate([x0, np.abs(r)])
        self.Binv = np.diag(sign)  # inverse of the initial diagonal basis
        self._pivots_since_refactor = 0
        self.pivot_log: list[int] = []

    def _refactor(self):
        B = self.A[:, self.basis]
        self.Binv = np.linalg.inv(B)
        nonbasic = self.status != _BASIC
        xn = np.where(self.status == _AT_UPPER, self.hi, self.lo)
        contrib = self.A[:, nonbasic] @ xn[nonbasic]
        self.x[self.basis] = self.Binv @ (self.b - contrib)
        self._pivots_since_refactor = 0

    def run(self, c, allowed, bland: bool) -> None:
        """Maximize c over the current feasible basis."""
        tol = self.tol
        stall = 0
        use_bland = bland
        max_iters = 200 * (self.m + self.total) + 10000
        for _ in range(max_iters):
            y = self.Binv.T @ c[self.basis]
            d = c - self.A.T @ y
            at_lo = (self.status == _AT_LOWER) & allowed & (d > tol)
            at_hi = (self.status == _AT_UPPER) & allowed & (d < -tol)
            mask = at_lo | at_hi
            candidates = np.nonzero(mask)[0]
            if candidates.size == 0:
                return
            if use_bland:
                j = int(candidates[0])
            else:
                vio = np.abs(d[candidates])
                j = int(candidates[int(np.argmax(vio))])  # argmax keeps first max
            direction = 1.0 if self.status[j] == _AT_LOWER else -1.0
            w = direction * (self.Binv @ self.A[:, j])
            # ratio test: basic variables hitting a bound, or j flipping bounds
            t_best = self.hi[j] - self.lo[j]
            leave = -1  # -1 encodes a bound flip of the entering variable
            leave_to = _AT_LOWER
            xb = self.x[self.basis]
            pos = w > tol
            neg = w < -tol
            with np.errstate(divide="ignore", invalid="ignore"):
                t_pos = np.where(pos, (xb - self.lo[self.basis]) / np.where(pos, w, 1.0), np.inf)
                t_neg = np.where(neg, (xb - self.hi[self.basis]) / np.where(neg, w, 1.0), np.inf)
            t_rows = np.maximum(np.minimum(t_pos, t_neg), 0.0)
            if t_rows.size:
                t_min = float(np.min(t_rows))
                if t_min < t_best - tol:
                    # tie-break by smallest variable index, as Bland prescribes
                    ties = np.nonzero(t_rows <= t_min + tol)[0]
                    row = int(ties[np.argmin(self.basis[ties])])
                    t_best = t_min
                    leave = row
                    leave_to = _AT_LOWER if t_pos[row] <= t_neg[row] else _AT_UPPER
            if not np.isfinite(t_best):
                raise ArithmeticError("unbounded direction despite finite bounds")
            t = max(t_best, 0.0)
            if t <= tol:
                stall += 1
                if stall >= _STALL_LIMIT:
                    use_bland = True
            else:
                stall = 0
                use_bland = bland
            self.x[self.basis] -= t * w
            self.x[j] += direction * t
            self.pivot_log.append(j)
            if leave < 0:
                self.status[j] = _AT_UPPER if direction > 0 else _AT_LOWER
            else:
                out = self.basis[leave]
                self.status[out] = leave_to
                self.x[out] = self.lo[out] if leave_to == _AT_LOWER else self.hi[out]
                self.basis[leave] = j
                self.status[j] = _BASIC
                self._update_inverse(leave, self.A[:, j])
                self._pivots_since_refactor += 1
                if self._pivots_since_refactor >= _REFACTOR_EVERY:
                    self._refactor()
        raise ArithmeticError("simplex iteration limit exceeded")

    def _update_inverse(self, row, col):
        u = self.Binv @ col
        pivot = u[row]
        if abs(pivot) < 1e-12:
            self._refactor()
            return
        self.Binv[row] /= pivot
        u[row] = 0.0
        self.Binv -= np.outer(u, self.Binv[row])


def lp_solve(problem: LpProblem, tol: float = 1e-9, pricing: str = "auto") -> LpSolution:
    """Two-phase bounded simplex. Raises LpInfeasible when no point exists."""
    if pricing not in ("auto", "bland"):
        raise ValueError("pricing must be 'auto' or 'bland'")
    A, b, lo, hi = problem.A, problem.b, problem.lo, problem.hi
    m, n = A.shape
    if m == 0:
        x = np.where(problem.c > 0, hi, lo)
        return LpSolution(float(problem.c @ x), x)
    bland = pricing == "bland"
    tab = _Tableau(A, b, lo, hi, tol)
    allowed = np.ones(tab.total, dtype=bool)

    # phase 1: minimize the artificial total
    c1 = np.zeros(tab.total)
    c1[n:] = -1.0
    tab.run(c1, allowed, bland)
    infeas = float(np.sum(tab.x[n:]))
    if infeas > 10.0 * tol * max(1.0, float(np.max(np.abs(b), initial=0.0))):
        raise LpInfeasible(f"phase 1 residual {infeas:.3e}")

    # lock artificials at zero; rows whose artificial stays basic at zero are
    # redundant and harmless
    tab.hi[n:] = 0.0
    tab.x[n:] = np.minimum(tab.x[n:], tab.hi[n:])
    allowed[n:] = False

    c2 = np.concatenate([problem.c, np.zeros(m)])
    tab.run(c2, allowed, bland)
    x = tab.x[:n].copy()
    np.clip(x, lo, hi, out=x)
    return LpSolution(float(problem.c @ x), x, tuple(tab.pivot_log))


def lp_feasible_point(A, b, lo, hi, tol: float = 1e-9) -> np.ndarray | None:
    """Feasibility-only solve; returns a point or None."""
    lo = np.asarray(lo, dtype=float)
    prob = LpProblem(np.zeros(lo.size), A, b, lo, hi)
    try:
        return lp_solve(prob, tol=tol).x
    except LpInfeasible:
        return None
