"""State-update sets and forward reachable sets for discrete-time systems.

An open-loop update set couples (x_k, u_k, x_{k+1}) over a chosen domain box;
a state-input map couples (x_k, u_k) through a feedback law; composing the two
yields a closed-loop update set over (x_k, x_{k+1}).  Successor sets then come
from a generalized intersection with the current set followed by a coordinate
projection, so every step appends a fixed number of generators, binaries, and
constraints.  `reach` iterates the closed-loop identity with optional periodic
reduction to an interval hull.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .graphs import (
    ApproxPolicy,
    Decomposition,
    GraphSet,
    build_graph,
    project_io,
    witness_binaries,
)
from .pwa import evaluate_kind
from .query import (
    DEFAULT_ENUM_CAP,
    DEFAULT_TOLS,
    Tolerances,
    interval_hull,
)
from .sets import (
    ComplexityCount,
    DimensionError,
    HybridZonotope,
    IntervalBox,
    cartesian_product,
    generalized_intersection,
    linear_map,
    minkowski_sum,
)

__all__ = [
    "DomainCheckError",
    "StateUpdateSet",
    "ReachTrace",
    "build_open_sus",
    "build_state_input_map",
    "free_input_map",
    "close_loop",
    "successor_open",
    "successor_closed",
    "reach",
    "trajectory_binaries",
    "CellwiseCertifier",
    "DomainBoxHull",
]


class DomainCheckError(RuntimeError):
    """A set escapes the domain over which an update set is valid."""


_KINDS = ("open", "state_input", "closed")


def _box_contains(outer: IntervalBox, inner: IntervalBox, rel: float = 1e-9) -> bool:
    # Scale-aware box containment; the slack guards against fp noise only.
    scale = max(1.0, float(np.max(np.abs(outer.lo))), float(np.max(np.abs(outer.hi))))
    return outer.contains(inner, tol=rel * scale)


def _box_slice(box: IntervalBox, start: int, stop: int) -> IntervalBox:
    return IntervalBox(box.lo[start:stop], box.hi[start:stop])


@dataclass(frozen=True)
class StateUpdateSet:
    """A set-valued map stored as a hybrid zonotope over stacked blocks.

    kind "open":        blocks (x, u, x+), domain over (x, u)
    kind "state_input": blocks (x, u),     domain over x
    kind "closed":      blocks (x, x+),    domain over x
    """

    set: HybridZonotope
    kind: str
    split: tuple[int, ...]
    domain: IntervalBox
    over_approx: bool = False
    graph: GraphSet | None = None
    remainder: IntervalBox | None = None
    parts: tuple["StateUpdateSet", ...] = ()

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown state-update-set kind '{self.kind}'")
        split = tuple(int(s) for s in self.split)
        object.__setattr__(self, "split", split)
        if self.set.n != sum(split):
            raise DimensionError(
                f"set has dim {self.set.n}, split {split} sums to {sum(split)}")
        if self.kind == "open":
            if len(split) != 3 or split[0] != split[2]:
                raise ValueError("open-loop split must be (n_x, n_u, n_x)")
            lead = split[0] + split[1]
        elif self.kind == "state_input":
            if len(split) != 2:
                raise ValueError("state-input split must be (n_x, n_u)")
            lead = split[0]
        else:
            if len(split) != 2 or split[0] != split[1]:
                raise ValueError("closed-loop split must be (n_x, n_x)")
            lead = split[0]
        if self.domain.dim != lead:
            raise DimensionError(
                f"domain has dim {self.domain.dim}, leading block has dim {lead}")

    @property
    def n_x(self) -> int:
        return self.split[0]

    @property
    def n_u(self) -> int:
        return self.split[1] if self.kind != "closed" else 0


def build_open_sus(d: Decomposition, box: IntervalBox,
                   approx: ApproxPolicy | None = None,
                   remainder: IntervalBox | None = None) -> StateUpdateSet:
    """Open-loop update set {(x, u, f(x, u))} over the given (x, u) box.

    `remainder` is an extra additive uncertainty on the successor block
    (e.g. a truncation error interval); it is Minkowski-summed into the
    successor coordinates and marks the result as an over-approximation.
    """
    n_out = d.n_outputs
    n_in = d.n_inputs
    n_u = n_in - n_out
    if n_u < 0:
        raise ValueError("open-loop dynamics need at least as many inputs as outputs")
    g = build_graph(d, box, approx)
    z = project_io(g)
    over = not g.exact
    if remainder is not None:
        if remainder.dim != n_out:
            raise DimensionError("remainder box must match the successor dimension")
        embed = np.vstack([np.zeros((n_in, n_out)), np.eye(n_out)])
        z = minkowski_sum(z, linear_map(embed, HybridZonotope.from_box(remainder)))
        over = over or bool(np.any(remainder.half_width > 0))
    return StateUpdateSet(set=z, kind="open", split=(n_out, n_u, n_out),
                          domain=box, over_approx=over, graph=g,
                          remainder=remainder)


def build_state_input_map(d: Decomposition, box: IntervalBox,
                          approx: ApproxPolicy | None = None) -> StateUpdateSet:
    """Feedback-law set {(x, u) | u in C(x)} over the given state box."""
    g = build_graph(d, box, approx)
    z = project_io(g)
    return StateUpdateSet(set=z, kind="state_input",
                          split=(d.n_inputs, d.n_outputs),
                          domain=box, over_approx=not g.exact, graph=g)


def free_input_map(state_box: IntervalBox, input_box: IntervalBox) -> StateUpdateSet:
    """State-input map of an uninformed feedback law: C(x) = U for every x."""
    return StateUpdateSet(set=HybridZonotope.from_box(state_box.stack(input_box)),
                          kind="state_input",
                          split=(state_box.dim, input_box.dim),
                          domain=state_box, over_approx=False)


def close_loop(psi: StateUpdateSet, theta: StateUpdateSet, *,
               tols: Tolerances = DEFAULT_TOLS,
               enum_cap: int = DEFAULT_ENUM_CAP,
               hull_mode: str = "relaxed") -> StateUpdateSet:
    """Compose an open-loop update set with a state-input map.

    The controller's input range (the u block of theta, bounded with
    `hull_mode`) must stay inside the open-loop input domain; otherwise the
    composed set would silently drop transitions, so that is a hard error.
    The composed domain is the box intersection of the state domains, which
    under that range check equals the state projection of D_psi intersected
    with theta.  The check may fail even when a tighter analysis would pass.
    """
    if psi.kind != "open" or theta.kind != "state_input":
        raise ValueError("close_loop needs an open-loop set and a state-input map")
    n, n_u = psi.n_x, psi.n_u
    if (theta.split[0], theta.split[1]) != (n, n_u):
        raise DimensionError(
            f"state-input split {theta.split} does not match open-loop ({n}, {n_u})")

    u_hull = _box_slice(
        interval_hull(theta.set, tols=tols, enum_cap=enum_cap, mode=hull_mode),
        n, n + n_u)
    u_domain = _box_slice(psi.domain, n, n + n_u)
    if not _box_contains(u_domain, u_hull):
        raise DomainCheckError(
            f"controller range {u_hull.lo}..{u_hull.hi} escapes the open-loop "
            f"input domain {u_domain.lo}..{u_domain.hi}")

    R = np.hstack([np.eye(n + n_u), np.zeros((n + n_u, n))])
    inter = generalized_intersection(psi.set, theta.set, R)
    P = np.zeros((2 * n, 2 * n + n_u))
    P[:n, :n] = np.eye(n)
    P[n:, n + n_u:] = np.eye(n)
    phi = linear_map(P, inter)

    expected = ComplexityCount(psi.set.ng + theta.set.ng,
                               psi.set.nb + theta.set.nb,
                               psi.set.nc + theta.set.nc + n + n_u)
    assert phi.counts == expected, (phi.counts, expected)

    domain = _box_slice(psi.domain, 0, n).intersect(theta.domain)
    return StateUpdateSet(set=phi, kind="closed", split=(n, n),
                          domain=domain,
                          over_approx=psi.over_approx or theta.over_approx,
                          parts=(psi, theta))


def _hull_of(z: HybridZonotope, tols: Tolerances, enum_cap: int,
             mode: str) -> IntervalBox:
    return interval_hull(z, tols=tols, enum_cap=enum_cap, mode=mode)


def successor_open(psi: StateUpdateSet, R: HybridZonotope, U: HybridZonotope, *,
                   tols: Tolerances = DEFAULT_TOLS,
                   enum_cap: int = DEFAULT_ENUM_CAP,
                   hull_mode: str = "exact",
                   r_hull: IntervalBox | None = None,
                   u_hull: IntervalBox | None = None) -> HybridZonotope:
    """One open-loop step: couple (R x U) to the (x, u) block and project.

    Output counts are the sums of the operand counts plus n_x + n_u extra
    constraint rows, one per coupled coordinate.
    """
    if psi.kind != "open":
        raise ValueError("successor_open needs an open-loop update set")
    n, n_u = psi.n_x, psi.n_u
    if R.n != n or U.n != n_u:
        raise DimensionError("state/input set dimensions do not match the update set")
    if r_hull is None:
        r_hull = _hull_of(R, tols, enum_cap, hull_mode)
    if u_hull is None:
        u_hull = _hull_of(U, tols, enum_cap, hull_mode)
    if not _box_contains(psi.domain, r_hull.stack(u_hull)):
        raise DomainCheckError("R x U escapes the open-loop domain; the successor "
                               "identity does not apply")

    Y = cartesian_product(R, U)
    C = np.hstack([np.eye(n + n_u), np.zeros((n + n_u, n))])
    inter = generalized_intersection(psi.set, Y, C)
    P = np.hstack([np.zeros((n, n + n_u)), np.eye(n)])
    out = linear_map(P, inter)

    expected = ComplexityCount(R.ng + U.ng + psi.set.ng,
                               R.nb + U.nb + psi.set.nb,
                               R.nc + U.nc + psi.set.nc + n + n_u)
    assert out.counts == expected, (out.counts, expected)
    return out


def successor_closed(phi: StateUpdateSet, R: HybridZonotope, *,
                     tols: Tolerances = DEFAULT_TOLS,
                     enum_cap: int = DEFAULT_ENUM_CAP,
                     hull_mode: str = "exact",
                     r_hull: IntervalBox | None = None) -> HybridZonotope:
    """One closed-loop step; adds exactly n_x constraint rows."""
    if phi.kind != "closed":
        raise ValueError("successor_closed needs a closed-loop update set")
    n = phi.n_x
    if R.n != n:
        raise DimensionError("state set dimension does not match the update set")
    if r_hull is None:
        r_hull = _hull_of(R, tols, enum_cap, hull_mode)
    if not _box_contains(phi.domain, r_hull):
        raise DomainCheckError("R escapes the closed-loop domain; the successor "
                               "identity does not apply")

    C = np.hstack([np.eye(n), np.zeros((n, n))])
    inter = generalized_intersection(phi.set, R, C)
    P = np.hstack([np.zeros((n, n)), np.eye(n)])
    out = linear_map(P, inter)

    expected = ComplexityCount(R.ng + phi.set.ng,
                               R.nb + phi.set.nb,
                               R.nc + phi.set.nc + n)
    assert out.counts == expected, (out.counts, expected)
    return out


@dataclass
class ReachTrace:
    """Reachable sets R_0..R_N with per-step bookkeeping.

    `sets` and `counts` hold the sets as computed (before any reduction);
    `hull_boxes` holds the certified interval hulls used for domain checks
    and reduction; `domain_checks[k-1]` covers the step producing R_k.
    A failed check truncates the trace and records `error`.
    """

    sets: list[HybridZonotope] = field(default_factory=list)
    counts: list[ComplexityCount] = field(default_factory=list)
    reduction_steps: list[int] = field(default_factory=list)
    domain_checks: list[bool] = field(default_factory=list)
    hull_boxes: list[IntervalBox] = field(default_factory=list)
    step_seconds: list[float] = field(default_factory=list)
    error: str | None = None

    def __post_init__(self):
        if len(self.counts) != len(self.sets):
            raise ValueError("counts must align with sets")

    @property
    def n_steps(self) -> int:
        return len(self.sets) - 1

    def to_dict(self) -> dict:
        return {
            "sets": [z.to_dict() for z in self.sets],
            "counts": [list(c.as_tuple()) for c in self.counts],
            "reduction_steps": list(self.reduction_steps),
            "domain_checks": [bool(b) for b in self.domain_checks],
            "hull_boxes": [{"lo": b.lo.tolist(), "hi": b.hi.tolist()}
                           for b in self.hull_boxes],
            "step_seconds": [float(t) for t in self.step_seconds],
            "error": self.error,
        }

    @staticmethod
    def from_dict(d: dict) -> "ReachTrace":
        sets = [HybridZonotope.from_dict(s) for s in d["sets"]]
        counts = [ComplexityCount(*c) for c in d["counts"]]
        boxes = [IntervalBox(np.asarray(b["lo"], dtype=float),
                             np.asarray(b["hi"], dtype=float))
                 for b in d.get("hull_boxes", [])]
        return ReachTrace(sets=sets, counts=counts,
                          reduction_steps=list(d.get("reduction_steps", [])),
                          domain_checks=[bool(b) for b in d.get("domain_checks", [])],
                          hull_boxes=boxes,
                          step_seconds=[float(t) for t in d.get("step_seconds", [])],
                          error=d.get("error"))


def _resolve_hull_provider(hull, tols: Tolerances, enum_cap: int):
    if callable(hull):
        return hull
    if hull in ("exact", "relaxed"):
        def provider(z, prev_box, k, _mode=hull):
            return interval_hull(z, tols=tols, enum_cap=enum_cap, mode=_mode)
        return provider
    raise ValueError(f"unknown hull provider '{hull}'")


def reach(phi: StateUpdateSet, R0: HybridZonotope, N: int,
          reduce_every: int | None = None, *,
          tols: Tolerances = DEFAULT_TOLS,
          enum_cap: int = DEFAULT_ENUM_CAP,
          hull="exact") -> ReachTrace:
    """Iterate the closed-loop successor identity for N steps.

    `hull` picks the interval-hull provider used for domain checks and
    reduction: "exact", "relaxed", or a callable (set, prev_box, k) -> box.
    When `reduce_every` divides the step index the working set is replaced
    by its hull box; recorded sets and counts are always pre-reduction.
    A failed domain check truncates the trace instead of raising.
    """
    if phi.kind != "closed":
        raise ValueError("reach needs a closed-loop update set")
    if N < 0:
        raise ValueError("step count must be nonnegative")
    provider = _resolve_hull_provider(hull, tols, enum_cap)

    trace = ReachTrace(sets=[R0], counts=[R0.counts], step_seconds=[0.0])
    box = provider(R0, None, 0)
    trace.hull_boxes.append(box)
    working = R0
    for k in range(1, N + 1):
        ok = _box_contains(phi.domain, box)
        trace.domain_checks.append(ok)
        if not ok:
            trace.error = (f"step {k}: hull {box.lo}..{box.hi} escapes the "
                           f"update-set domain")
            break
        t0 = time.perf_counter()
        rk = successor_closed(phi, working, tols=tols, enum_cap=enum_cap,
                              r_hull=box)
        trace.step_seconds.append(time.perf_counter() - t0)
        trace.sets.append(rk)
        trace.counts.append(rk.counts)
        box = provider(rk, box, k)
        trace.hull_boxes.append(box)
        if reduce_every and k % reduce_every == 0:
            trace.reduction_steps.append(k)
            working = HybridZonotope.from_box(box)
        else:
            working = rk
    return trace


def trajectory_binaries(phi: StateUpdateSet, trace: ReachTrace, k: int,
                        xs, us) -> np.ndarray:
    """Binary witness for state xs[k] inside trace.sets[k].

    xs is the simulated state sequence (rows x_0..x_N) and us the applied
    inputs (rows u_0..u_{N-1}).  The factor layout of R_k nests the per-step
    update-set binaries in front of the predecessor's, restarting whenever a
    reduction replaced the predecessor with a box, so the witness is the
    concatenation of per-step witnesses from step k back to the last reset.
    """
    if not phi.parts:
        raise ValueError("update set carries no component graphs to seed from")
    psi, theta = phi.parts
    if psi.graph is None or (theta.graph is None and theta.set.nb != 0):
        raise ValueError("component graphs were not retained")
    xs = np.asarray(xs, dtype=float)
    us = np.atleast_2d(np.asarray(us, dtype=float))
    reduced = set(trace.reduction_steps)
    chain = []
    j = k
    while j >= 1:
        chain.append(j)
        if (j - 1) in reduced or j - 1 == 0:
            break
        j -= 1
    if j == 1 and trace.sets[0].nb != 0:
        raise ValueError("initial set carries binary factors; cannot seed")
    parts = []
    for step in chain:
        x_prev = xs[step - 1]
        u_prev = us[step - 1]
        parts.append(witness_binaries(psi.graph, np.concatenate([x_prev, u_prev])))
        if theta.graph is not None:
            parts.append(witness_binaries(theta.graph, x_prev))
    seed = np.concatenate(parts) if parts else np.zeros(0)
    if seed.size != trace.sets[k].nb:
        raise ValueError(f"witness has {seed.size} binaries, set has "
                         f"{trace.sets[k].nb}")
    return seed


class _GraphIntervals:
    """Interval image of a graph set over a sub-box of its build domain.

    Each nonlinear step is bounded by the exact range of its piecewise-linear
    model (evaluated at cell endpoints and interior breakpoints) widened by
    the step's stored error interval, then clipped to the step's domain, so
    the result contains every value the hybrid zonotope admits on the cell.
    """

    def __init__(self, g: GraphSet):
        self.g = g
        self.d = g.decomposition
        self.info = {s.var: s for s in g.steps}
        self._fvals = {}
        for s in g.steps:
            if s.breakpoints is not None:
                a = self.d.assignments[self._step_of(s.var)]
                self._fvals[s.var] = evaluate_kind(a.func, a.params, s.breakpoints)

    def _step_of(self, var: int) -> int:
        for idx in range(len(self.d.assignments)):
            off = self.d.var_offset(idx)
            if off <= var < off + self.d.assignments[idx].width:
                return idx
        raise KeyError(var)

    def _clip(self, lo: float, hi: float, var: int) -> tuple[float, float]:
        dlo, dhi = self.g.domains[var]
        lo, hi = max(lo, dlo), min(hi, dhi)
        if lo > hi:
            mid = 0.5 * (lo + hi)
            lo = hi = mid
        return lo, hi

    def output_box(self, in_box: IntervalBox) -> IntervalBox:
        d = self.d
        iv: list[tuple[float, float]] = [(0.0, 0.0)] * d.n_vars
        n_in = 0
        for idx, a in enumerate(d.assignments):
            v = d.var_offset(idx)
            if a.kind == "input":
                iv[v] = self._clip(float(in_box.lo[n_in]), float(in_box.hi[n_in]), v)
                n_in += 1
            elif a.kind == "affine":
                lo = hi = a.offset
                for arg, cf in zip(a.args, a.coeffs):
                    alo, ahi = iv[arg]
                    if cf >= 0:
                        lo += cf * alo
                        hi += cf * ahi
                    else:
                        lo += cf * ahi
                        hi += cf * alo
                iv[v] = self._clip(lo, hi, v)
            elif a.kind == "unary":
                info = self.info.get(v)
                if info is None or info.breakpoints is None:
                    raise ValueError(f"no piecewise model stored for step {idx}")
                bp = info.breakpoints
                fv = self._fvals[v]
                alo, ahi = iv[a.args[0]]
                alo = min(max(alo, float(bp[0])), float(bp[-1]))
                ahi = min(max(ahi, float(bp[0])), float(bp[-1]))
                inner = bp[(bp > alo) & (bp < ahi)]
                pts = np.concatenate([[alo], inner, [ahi]])
                vals = np.interp(pts, bp, fv)
                lo, hi = float(vals.min()), float(vals.max())
                if info.error is not None:
                    lo += info.error.a
                    hi += info.error.b
                iv[v] = self._clip(lo, hi, v)
            elif a.kind == "atom":
                for j in range(a.atom.n_out):
                    iv[v + j] = self._clip(a.atom.out_lo[j], a.atom.out_hi[j], v + j)
            else:
                raise ValueError(f"unexpected step kind '{a.kind}' in expanded form")
        lo = np.array([iv[v][0] for v in self.g.output_dims])
        hi = np.array([iv[v][1] for v in self.g.output_dims])
        return IntervalBox(lo, hi)


class CellwiseCertifier:
    """Certified interval hull of one closed-loop step, cell by cell.

    The state box is split into a uniform grid.  Each cell runs through the
    controller graph and then the plant graph with interval arithmetic that
    includes every step's approximation error, and the per-cell boxes are
    unioned.  The result contains the exact successor of anything inside the
    input box, including the slack of the inflated graph sets, so it is a
    valid hull provider for `reach`.
    """

    def __init__(self, phi: StateUpdateSet, grid: int = 32, *,
                 tols: Tolerances = DEFAULT_TOLS,
                 enum_cap: int = DEFAULT_ENUM_CAP):
        if phi.kind != "closed" or not phi.parts:
            raise ValueError("cellwise certification needs a composed closed loop")
        psi, theta = phi.parts
        if psi.graph is None or theta.graph is None:
            raise ValueError("component graphs were not retained")
        self.phi = phi
        self.psi = psi
        self.theta = theta
        self.plant = _GraphIntervals(psi.graph)
        self.controller = _GraphIntervals(theta.graph)
        self.grid = int(grid)
        self.tols = tols
        self.enum_cap = enum_cap
        self.u_domain = _box_slice(psi.domain, psi.n_x, psi.n_x + psi.n_u)

    def image_box(self, box: IntervalBox) -> IntervalBox:
        n = self.phi.n_x
        edges = [np.linspace(box.lo[i], box.hi[i], self.grid + 1) for i in range(n)]
        lo = np.full(n, np.inf)
        hi = np.full(n, -np.inf)
        for idx in itertools.product(range(self.grid), repeat=n):
            cell = IntervalBox(np.array([edges[i][j] for i, j in enumerate(idx)]),
                               np.array([edges[i][j + 1] for i, j in enumerate(idx)]))
            u_raw = self.controller.output_box(cell)
            # The update set constrains u to its input domain, so clipping is
            # sound; ordering guards against fp-noise inversions at the edge.
            u_lo = np.minimum(np.maximum(u_raw.lo, self.u_domain.lo), self.u_domain.hi)
            u_hi = np.maximum(np.minimum(u_raw.hi, self.u_domain.hi), u_lo)
            u_box = IntervalBox(u_lo, u_hi)
            out = self.plant.output_box(cell.stack(u_box))
            lo = np.minimum(lo, out.lo)
            hi = np.maximum(hi, out.hi)
        if self.psi.remainder is not None:
            lo = lo + self.psi.remainder.lo
            hi = hi + self.psi.remainder.hi
        return IntervalBox(lo, hi)

    def __call__(self, z: HybridZonotope, prev_box: IntervalBox | None,
                 k: int) -> IntervalBox:
        if k == 0 or prev_box is None:
            return interval_hull(z, tols=self.tols, enum_cap=self.enum_cap,
                                 mode="exact")
        return self.image_box(prev_box)


class DomainBoxHull:
    """Constant hull from the plant graph's propagated output ranges.

    The graph construction bounds every variable by its domain-propagated
    interval, so each successor coordinate stays inside the output
    intervals (plus any remainder) no matter what the predecessor set was.
    A fixed box is therefore a sound hull for every step k >= 1; it costs
    nothing per step but cannot shrink with the actual reach sets, so it
    suits systems whose state range is static, e.g. logical ones.
    """

    def __init__(self, phi: StateUpdateSet, *,
                 tols: Tolerances = DEFAULT_TOLS,
                 enum_cap: int = DEFAULT_ENUM_CAP):
        psi = phi.parts[0] if phi.parts else phi
        if psi.graph is None:
            raise ValueError("the plant graph was not retained")
        dom = [psi.graph.domains[v] for v in psi.graph.output_dims]
        lo = np.array([d[0] for d in dom])
        hi = np.array([d[1] for d in dom])
        if psi.remainder is not None:
            lo = lo + psi.remainder.lo
            hi = hi + psi.remainder.hi
        self.box = IntervalBox(lo, hi)
        self.tols = tols
        self.enum_cap = enum_cap

    def __call__(self, z: HybridZonotope, prev_box: IntervalBox | None,
                 k: int) -> IntervalBox:
        if k == 0 or prev_box is None:
            return interval_hull(z, tols=self.tols, enum_cap=self.enum_cap,
                                 mode="exact")
        return self.box
