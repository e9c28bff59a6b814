"""Decision procedures over hybrid zonotopes.

Membership, emptiness, support, interval hulls, and 2-D outer polygons
all reduce to linear programs over the factor space once the binary
factors are fixed. Binary assignments are explored by depth-first
search with interval constraint propagation for pruning; support
queries additionally prune with interval upper bounds (deterministic
branch and bound). Every search is capped by an assignment budget on
n_b (default 25) and refuses larger inputs rather than degrade.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .lp import LpInfeasible, LpProblem, LpSolution, lp_solve
from .sets import HybridZonotope, IntervalBox


@dataclass(frozen=True)
class Tolerances:
    """Shared numeric tolerances; one instance flows through a pipeline."""

    feasibility: float = 1e-9
    membership: float = 1e-7
    support: float = 1e-9


DEFAULT_TOLS = Tolerances()
DEFAULT_ENUM_CAP = 25


class EnumerationCapError(RuntimeError):
    """Raised when a query would enumerate more binaries than allowed."""


class EmptySetError(RuntimeError):
    """Raised by queries that are undefined on the empty set."""


@dataclass(frozen=True)
class QueryResult:
    status: str  # member | non_member | empty | nonempty | value
    value: float | None = None
    certificate: tuple[np.ndarray, np.ndarray] | None = None

    def to_dict(self) -> dict:
        out: dict = {"status": self.status}
        if self.value is not None:
            out["value"] = self.value
        if self.certificate is not None:
            xc, xb = self.certificate
            out["certificate"] = {"xc": xc.tolist(), "xb": xb.tolist()}
        return out


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("HYZO_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, items):
    """Order-preserving map; threads when HYZO_THREADS > 1."""
    items = list(items)
    k = thread_count()
    if k <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=k) as pool:
        return list(pool.map(fn, items))


class _System:
    """Equality system A x = rhs over box-bounded factors x = (xc, xb).

    Holds the static matrices; propagation and search mutate only local
    bound arrays, so one instance serves many queries on the same set.
    """

    def __init__(self, A: np.ndarray, rhs: np.ndarray, ng: int, nb: int,
                 slack: float = 0.0, n_slack_rows: int = 0):
        # optional slack columns soften the first n_slack_rows to |.| <= slack
        m = A.shape[0]
        if slack > 0.0 and n_slack_rows > 0:
            S = np.zeros((m, n_slack_rows))
            S[:n_slack_rows, :] = np.eye(n_slack_rows)
            A = np.hstack([A, S])
            self.slack_lo = np.full(n_slack_rows, -slack)
            self.slack_hi = np.full(n_slack_rows, slack)
        else:
            self.slack_lo = np.zeros(0)
            self.slack_hi = np.zeros(0)
        self.A = np.ascontiguousarray(A)
        self.rhs = rhs
        self.ng = ng
        self.nb = nb
        self.nv = A.shape[1]
        self.pos = np.where(A > 0.0, A, 0.0)
        self.neg = np.where(A < 0.0, A, 0.0)
        self.nonzero = A != 0.0
        self.A_safe = np.where(self.nonzero, A, 1.0)
        self.col_used = self.nonzero.any(axis=0)
        self.prop_eps = 1e-12
        # coordinate-form copy when the matrix is sparse enough that
        # entry-wise sweeps beat whole-matrix ones
        nnz = int(np.count_nonzero(A))
        if A.size > 10000 and nnz < 0.05 * A.size:
            r, c_ = np.nonzero(A)
            v = A[r, c_]
            self.sp_row, self.sp_col, self.sp_val = r, c_, v
            self.sp_pos = np.maximum(v, 0.0)
            self.sp_neg = np.minimum(v, 0.0)
        else:
            self.sp_row = None

    def initial_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.concatenate([-np.ones(self.ng + self.nb), self.slack_lo])
        hi = np.concatenate([np.ones(self.ng + self.nb), self.slack_hi])
        return lo, hi

    def propagate(self, lo: np.ndarray, hi: np.ndarray,
                  max_sweeps: int = 30) -> bool:
        """Tighten bounds in place; False when some row is proven empty.

        Whole-matrix Jacobi sweeps: every row's implied interval for every
        variable is formed at once, then combined column-wise.
        """
        A, rhs = self.A, self.rhs
        m = A.shape[0]
        if m == 0:
            return True
        eps = self.prop_eps
        scale = 1.0 + np.abs(rhs)
        sparse = self.sp_row is not None
        if not sparse:
            nz, a_safe = self.nonzero, self.A_safe
            neg_mask = A < 0.0
        for _ in range(max_sweeps):
            if sparse:
                row, col, val = self.sp_row, self.sp_col, self.sp_val
                t_lo = self.sp_pos * lo[col] + self.sp_neg * hi[col]
                t_hi = self.sp_pos * hi[col] + self.sp_neg * lo[col]
                sum_lo = np.bincount(row, weights=t_lo, minlength=m)
                sum_hi = np.bincount(row, weights=t_hi, minlength=m)
                if np.any(rhs < sum_lo - 1e-9 * scale) or np.any(rhs > sum_hi + 1e-9 * scale):
                    return False
                # entry e bounds A_ij x_j = rhs_i - (sum over k != j)
                c_lo = ((rhs - sum_hi)[row] + t_hi) / val
                c_hi = ((rhs - sum_lo)[row] + t_lo) / val
                flip = val < 0.0
                c_lo[flip], c_hi[flip] = c_hi[flip], c_lo[flip]
                col_lo = np.full(self.nv, -np.inf)
                col_hi = np.full(self.nv, np.inf)
                np.maximum.at(col_lo, col, c_lo)
                np.minimum.at(col_hi, col, c_hi)
                new_lo = np.maximum(lo, col_lo - eps)
                new_hi = np.minimum(hi, col_hi + eps)
            else:
                term_lo = self.pos * lo + self.neg * hi  # per-entry min of A_ij x_j
                term_hi = self.pos * hi + self.neg * lo
                sum_lo = term_lo.sum(axis=1)
                sum_hi = term_hi.sum(axis=1)
                if np.any(rhs < sum_lo - 1e-9 * scale) or np.any(rhs > sum_hi + 1e-9 * scale):
                    return False
                # row i bounds A_ij x_j = rhs_i - (sum over k != j)
                num_lo = (rhs - sum_hi)[:, None] + term_hi
                num_hi = (rhs - sum_lo)[:, None] + term_lo
                cand_lo = num_lo / a_safe
                cand_hi = num_hi / a_safe
                cand_lo[neg_mask], cand_hi[neg_mask] = cand_hi[neg_mask], cand_lo[neg_mask]
                cand_lo[~nz] = -np.inf
                cand_hi[~nz] = np.inf
                new_lo = np.maximum(lo, cand_lo.max(axis=0) - eps)
                new_hi = np.minimum(hi, cand_hi.min(axis=0) + eps)
            crossed = new_hi < new_lo
            if np.any(crossed):
                if np.any(new_hi[crossed] < new_lo[crossed] - 1e-9):
                    return False
                nl = np.minimum(new_lo[crossed], new_hi[crossed])
                nh = np.maximum(new_lo[crossed], new_hi[crossed])
                new_lo[crossed] = nl
                new_hi[crossed] = nh
            if np.all(new_lo <= lo + eps) and np.all(new_hi >= hi - eps):
                lo[:] = new_lo
                hi[:] = new_hi
                return True
            lo[:] = new_lo
            hi[:] = new_hi
        return True

    def branch_variable(self, lo, hi, order) -> int:
        for j in order:
            if hi[self.ng + j] - lo[self.ng + j] > 1.0:
                return j
        return -1

    def fix_binary(self, lo, hi, j: int, val: float) -> None:
        lo[self.ng + j] = val
        hi[self.ng + j] = val

    def leaf_lp(self, c, lo, hi, tol):
        """LpSolution at the fixed-binary leaf, or None when infeasible."""
        prob = LpProblem(c, self.A, self.rhs, lo, hi)
        try:
            return lp_solve(prob, tol=tol)
        except LpInfeasible:
            return None

    def pinned_solution(self, lo, hi, c, tol):
        """Midpoint solution when propagation pinned every constrained
        variable (columns no row touches may take any in-bounds value).

        Gate networks pin exactly, so this skips the leaf LP there; any
        residual doubt returns None and the caller falls back to the LP.
        """
        if not np.all((hi - lo <= 1e-8) | ~self.col_used):
            return None
        mid = 0.5 * (lo + hi)
        res = np.abs(self.A @ mid - self.rhs)
        if np.all(res <= 1e3 * tol * (1.0 + np.abs(self.rhs))):
            return LpSolution(float(c @ mid), mid)
        return None


def _binary_order(z: HybridZonotope, order) -> list[int]:
    if order is None:
        return list(range(z.nb))
    order = [int(j) for j in order]
    if sorted(order) != list(range(z.nb)):
        raise ValueError("branch order must be a permutation of binaries")
    return order


def _check_cap(z: HybridZonotope, enum_cap: int) -> None:
    if z.nb > enum_cap:
        raise EnumerationCapError(
            f"enumeration cap: set has {z.nb} binary factors, cap is {enum_cap}")


def _membership_system(z: HybridZonotope, point: np.ndarray,
                       tols: Tolerances) -> _System:
    A = np.block([[z.Gc, z.Gb], [z.Ac, z.Ab]]) if z.nc else np.hstack([z.Gc, z.Gb])
    rhs = np.concatenate([point - z.c, z.b])
    return _System(A, rhs, z.ng, z.nb, slack=tols.membership, n_slack_rows=z.n)


def _constraint_system(z: HybridZonotope) -> _System:
    A = np.hstack([z.Ac, z.Ab])
    return _System(A, z.b.copy(), z.ng, z.nb)


def _dfs_first_feasible(sys_: _System, order: list[int], tol: float,
                        obj: np.ndarray | None = None):
    """First feasible leaf in deterministic DFS order, or None."""
    c = np.zeros(sys_.nv) if obj is None else obj
    lo0, hi0 = sys_.initial_bounds()
    stack = [(lo0, hi0)]
    while stack:
        lo, hi = stack.pop()
        if not sys_.propagate(lo, hi):
            continue
        j = sys_.branch_variable(lo, hi, order)
        if j < 0:
            # all binaries fixed (or interval-pinned); solve with binaries
            # snapped to the nearest admissible value
            blo, bhi = lo.copy(), hi.copy()
            for k in range(sys_.nb):
                i = sys_.ng + k
                if bhi[i] - blo[i] <= 1.0:
                    v = 1.0 if (blo[i] + bhi[i]) >= 0.0 else -1.0
                    if v < blo[i] - 0.5 or v > bhi[i] + 0.5:
                        break
                    blo[i] = bhi[i] = v
            else:
                if not sys_.propagate(blo, bhi):
                    continue
                sol = sys_.pinned_solution(blo, bhi, c, tol)
                if sol is None:
                    sol = sys_.leaf_lp(c, blo, bhi, tol)
                if sol is not None:
                    return sol, blo
            continue
        # push -1 branch first so +1 is explored first (LIFO)
        for val in (-1.0, 1.0):
            l2, h2 = lo.copy(), hi.copy()
            sys_.fix_binary(l2, h2, j, val)
            stack.append((l2, h2))
    return None


def contains_point(z: HybridZonotope, point, *, tols: Tolerances = DEFAULT_TOLS,
                   enum_cap: int = DEFAULT_ENUM_CAP, seed_binaries=None,
                   order=None) -> QueryResult:
    """Decide point membership; certificate holds the witness factors."""
    point = np.asarray(point, dtype=float).ravel()
    if point.size != z.n:
        raise ValueError(f"point has dim {point.size}, set has dim {z.n}")
    sys_ = _membership_system(z, point, tols)
    ordv = _binary_order(z, order)

    def result_from(xvec, blo):
        xc = xvec[: z.ng]
        xb = blo[z.ng: z.ng + z.nb].copy()
        res = np.max(np.abs(z.point_of(xc, xb) - point), initial=0.0)
        cres = np.max(np.abs(z.constraint_residual(xc, xb)), initial=0.0)
        if res <= 10 * tols.membership and cres <= 1e3 * tols.feasibility:
            return QueryResult("member", certificate=(xc, xb))
        return None

    if seed_binaries is not None:
        seed = np.asarray(seed_binaries, dtype=float).ravel()
        if seed.size != z.nb or not np.all(np.abs(np.abs(seed) - 1.0) < 1e-9):
            raise ValueError("seed must assign every binary to +/-1")
        lo, hi = sys_.initial_bounds()
        lo[z.ng: z.ng + z.nb] = seed
        hi[z.ng: z.ng + z.nb] = seed
        if sys_.propagate(lo, hi):
            obj = np.zeros(sys_.nv)
            sol = sys_.pinned_solution(lo, hi, obj, tols.feasibility)
            if sol is None:
                sol = sys_.leaf_lp(obj, lo, hi, tols.feasibility)
            if sol is not None:
                got = result_from(sol.x, lo)
                if got is not None:
                    return got
        # seed missed; fall through to the full search

    _check_cap(z, enum_cap)
    hit = _dfs_first_feasible(sys_, ordv, tols.feasibility)
    if hit is not None:
        sol, blo = hit
        got = result_from(sol.x, blo)
        if got is not None:
            return got
    return QueryResult("non_member")


def is_empty(z: HybridZonotope, *, tols: Tolerances = DEFAULT_TOLS,
             enum_cap: int = DEFAULT_ENUM_CAP, order=None) -> QueryResult:
    """Emptiness of the represented set (not of its dimension)."""
    _check_cap(z, enum_cap)
    sys_ = _constraint_system(z)
    hit = _dfs_first_feasible(sys_, _binary_order(z, order), tols.feasibility)
    if hit is None:
        return QueryResult("empty")
    sol, blo = hit
    xc = sol.x[: z.ng]
    xb = blo[z.ng: z.ng + z.nb].copy()
    return QueryResult("nonempty", certificate=(xc, xb))


def _support_bound(z: HybridZonotope, d: np.ndarray, lo, hi) -> float:
    """Interval upper bound of d'(Gc xc + Gb xb + c) over box factors."""
    g = np.concatenate([d @ z.Gc, d @ z.Gb])
    ub = float(d @ z.c)
    ub += float(np.sum(np.where(g > 0, g * hi[: g.size], g * lo[: g.size])))
    return ub


def support(z: HybridZonotope, d, *, tols: Tolerances = DEFAULT_TOLS,
            enum_cap: int = DEFAULT_ENUM_CAP, order=None) -> QueryResult:
    """Exact support value max d'x over the set; branch and bound."""
    d = np.asarray(d, dtype=float).ravel()
    if d.size != z.n:
        raise ValueError("direction dimension mismatch")
    _check_cap(z, enum_cap)
    sys_ = _constraint_system(z)
    ordv = _binary_order(z, order)
    obj = np.concatenate([d @ z.Gc, d @ z.Gb])
    best: float | None = None
    best_cert = None
    lo0, hi0 = sys_.initial_bounds()
    stack = [(lo0, hi0)]
    while stack:
        lo, hi = stack.pop()
        if not sys_.propagate(lo, hi):
            continue
        if best is not None and _support_bound(z, d, lo, hi) <= best + tols.support:
            continue
        j = sys_.branch_variable(lo, hi, ordv)
        if j < 0:
            blo, bhi = lo.copy(), hi.copy()
            ok = True
            for k in range(sys_.nb):
                i = sys_.ng + k
                v = 1.0 if (blo[i] + bhi[i]) >= 0.0 else -1.0
                if v < blo[i] - 0.5 or v > bhi[i] + 0.5:
                    ok = False
                    break
                blo[i] = bhi[i] = v
            if not ok:
                continue
            sol = sys_.leaf_lp(obj, blo, bhi, tols.feasibility)
            if sol is None:
                continue
            val = float(d @ z.c) + float(sol.value)
            if best is None or val > best + tols.support:
                best = val
                best_cert = (sol.x[: z.ng].copy(), blo[z.ng: z.ng + z.nb].copy())
            continue
        # explore the bound-maximizing branch first for fast incumbents
        branches = []
        for val in (-1.0, 1.0):
            l2, h2 = lo.copy(), hi.copy()
            sys_.fix_binary(l2, h2, j, val)
            branches.append((_support_bound(z, d, l2, h2), val, l2, h2))
        branches.sort(key=lambda t: (t[0], t[1]))  # LIFO pops best bound first
        for _, _, l2, h2 in branches:
            stack.append((l2, h2))
    if best is None:
        raise EmptySetError("support of the empty set")
    return QueryResult("value", value=best, certificate=best_cert)


def support_relaxed(z: HybridZonotope, d, *, tols: Tolerances = DEFAULT_TOLS) -> float:
    """Upper bound on the support from the continuous relaxation xb in [-1,1]."""
    d = np.asarray(d, dtype=float).ravel()
    if d.size != z.n:
        raise ValueError("direction dimension mismatch")
    nv = z.ng + z.nb
    if z.nc == 0:
        g = np.concatenate([d @ z.Gc, d @ z.Gb])
        return float(d @ z.c + np.sum(np.abs(g)))
    obj = np.concatenate([d @ z.Gc, d @ z.Gb])
    prob = LpProblem(obj, np.hstack([z.Ac, z.Ab]), z.b, -np.ones(nv), np.ones(nv))
    sol = lp_solve(prob, tol=tols.feasibility)
    return float(d @ z.c + sol.value)


def interval_hull(z: HybridZonotope, *, tols: Tolerances = DEFAULT_TOLS,
                  enum_cap: int = DEFAULT_ENUM_CAP,
                  mode: str = "exact") -> IntervalBox:
    """Axis-aligned bounding box from per-dimension support values.

    mode="exact" enumerates binaries (cap applies); mode="relaxed" uses
    the continuous relaxation, yielding a sound but possibly loose box.
    """
    if mode not in ("exact", "relaxed"):
        raise ValueError("mode must be 'exact' or 'relaxed'")

    def one_dim(i: int) -> tuple[float, float]:
        e = np.zeros(z.n)
        e[i] = 1.0
        if mode == "relaxed":
            return -support_relaxed(z, -e, tols=tols), support_relaxed(z, e, tols=tols)
        hi = support(z, e, tols=tols, enum_cap=enum_cap).value
        lo = -support(z, -e, tols=tols, enum_cap=enum_cap).value
        return lo, hi

    pairs = parallel_map(one_dim, range(z.n))
    lo = np.array([p[0] for p in pairs])
    hi = np.array([p[1] for p in pairs])
    return IntervalBox(lo, np.maximum(hi, lo))


def enumerate_binary_assignments(z: HybridZonotope, *,
                                 tols: Tolerances = DEFAULT_TOLS,
                                 enum_cap: int = DEFAULT_ENUM_CAP,
                                 order=None) -> list[np.ndarray]:
    """All binary assignments whose constrained zonotope is nonempty."""
    _check_cap(z, enum_cap)
    sys_ = _constraint_system(z)
    ordv = _binary_order(z, order)
    out: list[np.ndarray] = []
    lo0, hi0 = sys_.initial_bounds()
    stack = [(lo0, hi0)]
    while stack:
        lo, hi = stack.pop()
        if not sys_.propagate(lo, hi):
            continue
        j = sys_.branch_variable(lo, hi, ordv)
        if j < 0:
            blo, bhi = lo.copy(), hi.copy()
            ok = True
            for k in range(sys_.nb):
                i = sys_.ng + k
                v = 1.0 if (blo[i] + bhi[i]) >= 0.0 else -1.0
                if v < blo[i] - 0.5 or v > bhi[i] + 0.5:
                    ok = False
                    break
                blo[i] = bhi[i] = v
            if ok and sys_.leaf_lp(np.zeros(sys_.nv), blo, bhi, tols.feasibility) is not None:
                out.append(blo[z.ng: z.ng + z.nb].copy())
            continue
        for val in (1.0, -1.0):
            l2, h2 = lo.copy(), hi.copy()
            sys_.fix_binary(l2, h2, j, val)
            stack.append((l2, h2))
    out.sort(key=lambda a: tuple(a))
    return out


@dataclass(frozen=True)
class PolygonPiece:
    assignment: tuple[float, ...] | None
    vertices: np.ndarray  # (k, 2), counterclockwise
    over_approx: bool = True


def _clip_halfplane(poly: np.ndarray, normal: np.ndarray, offset: float) -> np.ndarray:
    """Keep {p | normal . p <= offset} of a convex polygon (Sutherland-Hodgman)."""
    if poly.shape[0] == 0:
        return poly
    keep: list[np.ndarray] = []
    m = poly.shape[0]
    d = poly @ normal - offset
    for i in range(m):
        j = (i + 1) % m
        di, dj = d[i], d[j]
        if di <= 1e-12:
            keep.append(poly[i])
        if (di < -1e-12 and dj > 1e-12) or (di > 1e-12 and dj < -1e-12):
            t = di / (di - dj)
            keep.append(poly[i] + t * (poly[j] - poly[i]))
    if not keep:
        return np.zeros((0, 2))
    out = np.array(keep)
    # drop consecutive duplicates introduced by clipping
    dedup = [out[0]]
    for p in out[1:]:
        if np.max(np.abs(p - dedup[-1])) > 1e-10:
            dedup.append(p)
    if len(dedup) > 1 and np.max(np.abs(dedup[0] - dedup[-1])) <= 1e-10:
        dedup.pop()
    return np.array(dedup)


def _polygon_for_assignment(z: HybridZonotope, xb: np.ndarray | None,
                            n_dirs: int, tols: Tolerances) -> np.ndarray | None:
    angles = 2.0 * np.pi * np.arange(n_dirs) / n_dirs
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)

    if xb is None:
        vals = [support_relaxed(z, d, tols=tols) for d in dirs]
    else:
        nv = z.ng
        shift = z.Gb @ xb if z.nb else np.zeros(z.n)
        base = z.c + shift
        rhs = z.b - (z.Ab @ xb if z.nb else 0.0)
        vals = []
        for d in dirs:
            if z.nc == 0 and nv == 0:
                vals.append(float(d @ base))
                continue
            prob = LpProblem(d @ z.Gc, z.Ac, rhs, -np.ones(nv), np.ones(nv))
            try:
                sol = lp_solve(prob, tol=tols.feasibility)
            except LpInfeasible:
                return None
            vals.append(float(d @ base + sol.value))
    big = max(1.0, max(abs(v) for v in vals)) * 4.0
    poly = np.array([[-big, -big], [big, -big], [big, big], [-big, big]])
    for d, v in zip(dirs, vals):
        poly = _clip_halfplane(poly, d, v + tols.support)
        if poly.shape[0] == 0:
            return None
    return poly


def polygon_2d(z: HybridZonotope, n_dirs: int = 64, *,
               tols: Tolerances = DEFAULT_TOLS,
               enum_cap: int = DEFAULT_ENUM_CAP,
               mode: str = "exact") -> list[PolygonPiece]:
    """Outer polygons of a 2-D set, one per feasible binary assignment.

    Each polygon is the intersection of n_dirs supporting half-planes,
    an over-approximation of that assignment's constrained zonotope.
    mode="relaxed" emits a single polygon for the whole relaxation.
    """
    if z.n != 2:
        raise ValueError("polygon extraction requires a 2-D set")
    if n_dirs < 3:
        raise ValueError("need at least 3 directions")
    if mode == "relaxed":
        poly = _polygon_for_assignment(z, None, n_dirs, tols)
        return [] if poly is None else [PolygonPiece(None, poly)]
    if mode != "exact":
        raise ValueError("mode must be 'exact' or 'relaxed'")
    assigns = enumerate_binary_assignments(z, tols=tols, enum_cap=enum_cap)

    def job(xb: np.ndarray) -> PolygonPiece | None:
        poly = _polygon_for_assignment(z, xb, n_dirs, tols)
        if poly is None or poly.shape[0] < 1:
            return None
        return PolygonPiece(tuple(float(v) for v in xb), poly)

    pieces = parallel_map(job, assigns)
    return [p for p in pieces if p is not None]
