"""Whole-library acceptance checks with stated tolerances and budgets.

Every expected value here is produced outside the code under test:
closed-form arithmetic, plain-numpy simulation of the dynamics, or
exhaustive bit-level enumeration.  Runtime budgets use wall time.
"""

import itertools
import json
import time
from pathlib import Path

import numpy as np
import pytest

from hyzo.complexity import (
    bilinear_counts,
    closed_successor_counts,
    open_successor_counts,
)
from hyzo.graphs import (
    ApproxPolicy,
    Decomposition,
    affine,
    binary_gadget_decomposition,
    build_graph,
    input_assignment,
    nn_decomposition,
    project_io,
    propagate_domains,
    unary,
    witness_binaries,
)
from hyzo.pwa import UnaryFuncSpec, breakpoints, error_bound
from hyzo.query import Tolerances, contains_point, interval_hull
from hyzo.reach import (
    CellwiseCertifier,
    DomainBoxHull,
    build_open_sus,
    build_state_input_map,
    close_loop,
    free_input_map,
    reach,
    successor_closed,
    successor_open,
    trajectory_binaries,
)
from hyzo.scenario import build_pipeline, load_scenario
from hyzo.sets import (
    HybridZonotope,
    IntervalBox,
    cartesian_product,
    generalized_intersection,
    intersection,
    linear_map,
    translate,
)
from hyzo.vpoly import VPolyCollection, to_hybrid_zonotope

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def _random_union(rng, dim, n_v_max=5, reach=1.5):
    """Union of random vertex hulls; every polytope gets >= 1 vertex."""
    n_v = int(rng.integers(2, n_v_max + 1))
    n_p = int(rng.integers(1, 4))
    v = rng.uniform(-reach, reach, (dim, n_v))
    m = (rng.random((n_v, n_p)) < 0.5).astype(float)
    for j in range(n_p):
        m[int(rng.integers(0, n_v)), j] = 1.0
    return to_hybrid_zonotope(VPolyCollection(v, m))


# ---------------------------------------------------------------------------
# vertex-union conversion counts


def test_vertex_union_counts():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    for _ in range(50):
        n = int(rng.integers(1, 4))
        n_v = int(rng.integers(1, 11))
        n_p = int(rng.integers(1, 7))
        v = rng.uniform(-5.0, 5.0, (n, n_v))
        m = (rng.random((n_v, n_p)) < 0.4).astype(float)
        for j in range(n_p):
            m[int(rng.integers(0, n_v)), j] = 1.0
        z = to_hybrid_zonotope(VPolyCollection(v, m))
        assert z.counts.as_tuple() == (2 * n_v, n_p, n_v + 2)
    assert time.perf_counter() - start < 1.0


# ---------------------------------------------------------------------------
# bilinear-constraint calculator


# frozen reference triples (n_g, n_b, n_c) per benchmark case and method
BILINEAR_ROWS = {
    ((3, 9, 18), "grid2d"): (19, 5, 11),
    ((3, 9, 18), "square1d"): (24, 10, 14),
    ((3, 9, 18), "strip1d"): (41, 10, 22),
    ((6, 17, 34), "grid2d"): (73, 26, 38),
    ((6, 17, 34), "square1d"): (40, 18, 22),
    ((6, 17, 34), "strip1d"): (73, 18, 38),
    ((9, 26, 52), "grid2d"): (163, 65, 83),
    ((9, 26, 52), "square1d"): (56, 26, 30),
    ((9, 26, 52), "strip1d"): (105, 26, 54),
    ((12, 34, 68), "grid2d"): (289, 122, 146),
    ((12, 34, 68), "square1d"): (72, 34, 38),
    ((12, 34, 68), "strip1d"): (137, 34, 70),
}


def test_bilinear_calculator_rows():
    for (case, method), want in BILINEAR_ROWS.items():
        got = bilinear_counts(case, method)
        assert (got.ng, got.nb, got.nc) == want, (case, method)


# ---------------------------------------------------------------------------
# successor-count recurrences


def _random_plant(rng):
    """Contractive random plant so five steps never leave the domain box:
    |x'| <= 6 args * 0.15 * 2 + 0.1 offset + sin inflation < 2."""
    n = int(rng.integers(1, 4))
    m = int(rng.integers(1, 3))
    curved = bool(rng.random() < 0.5)
    steps = [input_assignment() for _ in range(n + m)]
    args = list(range(n + m))
    if curved:
        steps.append(unary("sin", 0))
        args.append(n + m)
    base = len(steps)
    for _ in range(n):
        coeffs = tuple(float(c) for c in rng.uniform(-0.15, 0.15, len(args)))
        steps.append(affine(tuple(args), coeffs,
                            float(rng.uniform(-0.1, 0.1))))
    dec = Decomposition(n + m, tuple(steps), tuple(range(base, base + n)))
    box = IntervalBox(np.full(n + m, -2.0), np.full(n + m, 2.0))
    approx = ApproxPolicy(default_nv=7) if curved else None
    return dec, box, n, m, approx


def test_successor_count_recurrence():
    rng = np.random.default_rng(202)
    for _ in range(10):
        dec, box, n, m, approx = _random_plant(rng)
        psi = build_open_sus(dec, box, approx)

        r = _random_union(rng, n)
        u = _random_union(rng, m)
        succ = successor_open(psi, r, u)
        want = open_successor_counts(psi.set.counts, r.counts, u.counts, n, m)
        assert succ.counts.as_tuple() == want.as_tuple()

        theta = free_input_map(IntervalBox(box.lo[:n], box.hi[:n]),
                               IntervalBox(np.full(m, -0.3), np.full(m, 0.3)))
        phi = close_loop(psi, theta)
        closed = successor_closed(phi, r)
        want = closed_successor_counts(phi.set.counts, r.counts, n)
        assert closed.counts.as_tuple() == want.as_tuple()

        # five steps without reduction grow affinely with a fixed slope
        r0 = HybridZonotope.from_box(
            IntervalBox(np.full(n, -0.2), np.full(n, 0.2)))
        trace = reach(phi, r0, 5, None, hull="relaxed")
        assert trace.error is None and len(trace.counts) == 6
        g0, b0, c0 = trace.counts[0].as_tuple()
        gp, bp, cp = phi.set.counts.as_tuple()
        for k, c in enumerate(trace.counts):
            assert c.as_tuple() == (g0 + k * gp, b0 + k * bp,
                                    c0 + k * (cp + n))


# ---------------------------------------------------------------------------
# pendulum domain propagation


def test_pendulum_domain_propagation():
    sc = load_scenario(SCENARIOS / "pendulum.json")
    domains = propagate_domains(sc.plant, sc.plant_box)
    # successor angle: 4 + 0.1*8 + 0.005*20 + 0.05*1   = 4.95
    # successor speed: 8 + 1*1  + 0.1*20   + 0.05*1*8  = 11.4
    assert domains[6][0] == pytest.approx(-4.95, abs=1e-9)
    assert domains[6][1] == pytest.approx(4.95, abs=1e-9)
    assert domains[7][0] == pytest.approx(-11.4, abs=1e-9)
    assert domains[7][1] == pytest.approx(11.4, abs=1e-9)


# ---------------------------------------------------------------------------
# membership oracle equivalence


class _Expr:
    """A set paired with closed-form membership arithmetic.

    `sample` draws exact members; `robust_out(x, eps)` certifies that x
    lies farther than eps from the set.  Both sides are decided without
    the library, so query results can be compared point by point.
    """

    def __init__(self, z, sample, robust_out, anchor):
        self.z = z
        self.sample = sample
        self.robust_out = robust_out
        self.anchor = np.asarray(anchor, dtype=float)

    @property
    def dim(self):
        return self.z.n


def _box_leaf(rng, dim):
    lo = rng.uniform(-3.0, 0.0, dim)
    hi = lo + rng.uniform(0.5, 3.0, dim)
    z = HybridZonotope.from_box(IntervalBox(lo, hi))

    def sample(r):
        return r.uniform(lo, hi)

    def robust_out(x, eps):
        return bool(np.any(x < lo - eps) or np.any(x > hi + eps))

    return _Expr(z, sample, robust_out, 0.5 * (lo + hi))


def _box_union_leaf(rng, dim):
    n_p = int(rng.integers(2, 4))
    corners = np.array(list(itertools.product((0.0, 1.0), repeat=dim)))
    boxes, vs = [], []
    m = np.zeros((n_p * len(corners), n_p))
    for j in range(n_p):
        lo = rng.uniform(-3.0, 1.0, dim)
        hi = lo + rng.uniform(0.4, 2.0, dim)
        boxes.append((lo, hi))
        vs.append(lo + corners * (hi - lo))
        m[j * len(corners):(j + 1) * len(corners), j] = 1.0
    z = to_hybrid_zonotope(VPolyCollection(np.vstack(vs).T, m))

    def sample(r):
        lo, hi = boxes[int(r.integers(0, n_p))]
        return r.uniform(lo, hi)

    def robust_out(x, eps):
        return all(bool(np.any(x < lo - eps) or np.any(x > hi + eps))
                   for lo, hi in boxes)

    return _Expr(z, sample, robust_out, 0.5 * (boxes[0][0] + boxes[0][1]))


def _segment_union_leaf(rng, dim):
    n_p = int(rng.integers(2, 4))
    segs = []
    for _ in range(n_p):
        a = rng.uniform(-3.0, 3.0, dim)
        d = rng.uniform(-2.0, 2.0, dim)
        while np.linalg.norm(d) < 0.5:
            d = rng.uniform(-2.0, 2.0, dim)
        segs.append((a, a + d))
    v = np.concatenate([[a, b] for a, b in segs]).T
    m = np.zeros((2 * n_p, n_p))
    for j in range(n_p):
        m[2 * j:2 * j + 2, j] = 1.0
    z = to_hybrid_zonotope(VPolyCollection(v, m))

    def sample(r):
        a, b = segs[int(r.integers(0, n_p))]
        return a + r.uniform(0.0, 1.0) * (b - a)

    def robust_out(x, eps):
        def dist(a, b):
            d = b - a
            t = np.clip(np.dot(x - a, d) / np.dot(d, d), 0.0, 1.0)
            return float(np.linalg.norm(x - a - t * d))
        return all(dist(a, b) > eps for a, b in segs)

    return _Expr(z, sample, robust_out, segs[0][0])


def _op_translate(rng, e):
    t = rng.uniform(-2.0, 2.0, e.dim)
    return _Expr(translate(e.z, t),
                 lambda r: e.sample(r) + t,
                 lambda x, eps: e.robust_out(x - t, eps),
                 e.anchor + t)


def _op_linear(rng, e):
    q1 = np.linalg.qr(rng.normal(size=(e.dim, e.dim)))[0]
    q2 = np.linalg.qr(rng.normal(size=(e.dim, e.dim)))[0]
    a = q1 @ np.diag(rng.uniform(0.6, 1.8, e.dim)) @ q2
    # dist(x, a C) >= smin * dist(a^-1 x, C) keeps out-certificates valid
    smin = float(np.linalg.svd(a, compute_uv=False).min())
    return _Expr(linear_map(a, e.z),
                 lambda r: a @ e.sample(r),
                 lambda x, eps: e.robust_out(np.linalg.solve(a, x),
                                             eps / smin),
                 a @ e.anchor)


def _op_intersect_box(rng, e):
    half = rng.uniform(0.3, 1.5, e.dim)
    center = e.anchor + rng.uniform(-0.8, 0.8, e.dim) * half
    lo, hi = center - half, center + half
    z = intersection(e.z, HybridZonotope.from_box(IntervalBox(lo, hi)))

    def sample(r):
        for _ in range(40):
            x = e.sample(r)
            if np.all(x >= lo) and np.all(x <= hi):
                return x
        return e.anchor.copy()

    def robust_out(x, eps):
        return (e.robust_out(x, eps)
                or bool(np.any(x < lo - eps) or np.any(x > hi + eps)))

    return _Expr(z, sample, robust_out, e.anchor)


def _op_generalized(rng, e):
    k = int(rng.integers(1, e.dim + 1))
    r_mat = rng.uniform(-1.0, 1.0, (k, e.dim))
    r_mat[np.abs(r_mat).sum(axis=1) < 0.3] += 0.5
    y0 = r_mat @ e.anchor
    half = rng.uniform(0.3, 1.0, k)
    center = y0 + rng.uniform(-0.5, 0.5, k) * half
    ylo, yhi = center - half, center + half
    norm = float(np.linalg.norm(r_mat, 2))
    z = generalized_intersection(
        e.z, HybridZonotope.from_box(IntervalBox(ylo, yhi)), r_mat)

    def sample(r):
        for _ in range(40):
            x = e.sample(r)
            y = r_mat @ x
            if np.all(y >= ylo) and np.all(y <= yhi):
                return x
        return e.anchor.copy()

    def robust_out(x, eps):
        # dist(x, {z : Rz in Y}) >= dist(Rx, Y) / ||R||
        y = r_mat @ x
        far = bool(np.any(y < ylo - eps * norm) or np.any(y > yhi + eps * norm))
        return e.robust_out(x, eps) or far

    return _Expr(z, sample, robust_out, e.anchor)


def _op_cartesian(rng, e1, e2):
    d1 = e1.dim
    return _Expr(cartesian_product(e1.z, e2.z),
                 lambda r: np.concatenate([e1.sample(r), e2.sample(r)]),
                 lambda x, eps: (e1.robust_out(x[:d1], eps)
                                 or e2.robust_out(x[d1:], eps)),
                 np.concatenate([e1.anchor, e2.anchor]))


_LEAVES = (_box_leaf, _box_union_leaf, _segment_union_leaf)
_OPS = (_op_translate, _op_linear, _op_intersect_box, _op_generalized)


def _random_expr(rng):
    dim = int(rng.integers(1, 4))
    e = _LEAVES[int(rng.integers(0, len(_LEAVES)))](rng, dim)
    if e.dim < 3 and rng.random() < 0.35:
        other_dim = int(rng.integers(1, 4 - e.dim))
        other = _LEAVES[int(rng.integers(0, len(_LEAVES)))](rng, other_dim)
        if e.z.nb + other.z.nb <= 6:
            e = _op_cartesian(rng, e, other)
    for _ in range(int(rng.integers(1, 4))):
        e = _OPS[int(rng.integers(0, len(_OPS)))](rng, e)
    assert e.dim <= 3 and e.z.nb <= 6
    return e


def test_membership_oracle_equivalence():
    rng = np.random.default_rng(303)
    tols = Tolerances()
    start = time.perf_counter()
    disagreements = []
    total = 0
    for i in range(200):
        e = _random_expr(rng)
        hull = interval_hull(e.z, mode="relaxed", enum_cap=64)
        span = np.maximum(hull.hi - hull.lo, 1.0)
        for _ in range(3):
            x = np.asarray(e.sample(rng), dtype=float)
            res = contains_point(e.z, x, tols=tols, enum_cap=64)
            total += 1
            if res.status != "member":
                disagreements.append((i, "expected member", x.tolist()))
        made = tries = 0
        while made < 2:
            tries += 1
            if tries < 60:
                y = rng.uniform(hull.lo - 0.5 * span, hull.hi + 0.5 * span)
            else:
                y = hull.hi + span * tries
            if not e.robust_out(y, 1e-4):
                continue
            res = contains_point(e.z, y, tols=tols, enum_cap=64)
            total += 1
            made += 1
            if res.status != "non_member":
                disagreements.append((i, "expected non-member", y.tolist()))
    assert total == 1000
    assert disagreements == []
    assert time.perf_counter() - start < 60.0


# ---------------------------------------------------------------------------
# graph enclosure soundness


def _cos_of_scaled_sine():
    return Decomposition(1, (
        input_assignment(),
        unary("sin", 0),
        affine((1,), (float(np.pi),), 0.0),
        unary("cos", 2),
    ), (3,))


GADGET_CASES = (
    ("product", IntervalBox([-2.0, -2.0], [2.0, 2.0]),
     lambda x: x[0] * x[1]),
    ("quotient", IntervalBox([-2.0, 0.5], [2.0, 2.0]),
     lambda x: x[0] / x[1]),
    ("power", IntervalBox([0.5, -1.0], [2.0, 2.0]),
     lambda x: x[0] ** x[1]),
)


def test_graph_enclosure_soundness():
    rng = np.random.default_rng(404)
    cases = [(_cos_of_scaled_sine(), IntervalBox([-np.pi], [np.pi]),
              lambda x: np.cos(np.pi * np.sin(x[0])))]
    cases += [(binary_gadget_decomposition(name), box, fn)
              for name, box, fn in GADGET_CASES]
    total = violations = 0
    for dec, box, fn in cases:
        for n_v in (11, 21):
            g = build_graph(dec, box, ApproxPolicy(default_nv=n_v))
            zg = project_io(g)
            for _ in range(125):
                x = rng.uniform(box.lo, box.hi)
                point = np.concatenate([x, np.atleast_1d(fn(x))])
                seed = witness_binaries(g, x)
                res = contains_point(zg, point, seed_binaries=seed,
                                     enum_cap=max(25, zg.nb))
                total += 1
                violations += res.status != "member"
    assert total == 1000
    assert violations == 0


# ---------------------------------------------------------------------------
# interpolation error convergence


def test_interpolation_error_convergence():
    f = UnaryFuncSpec("sin", IntervalBox([-4.0], [4.0]))
    coarse = error_bound(f, 21)
    fine = error_bound(f, 41)
    assert fine.magnitude <= 0.30 * coarse.magnitude

    grid = np.linspace(-4.0, 4.0, 40001)
    for n_v, bound in ((21, coarse), (41, fine)):
        xs = breakpoints(f, n_v)
        gap = np.sin(grid) - np.interp(grid, xs, np.sin(xs))
        assert gap.min() >= bound.a - 1e-12
        assert gap.max() <= bound.b + 1e-12


# ---------------------------------------------------------------------------
# pendulum closed loop


def _load_controller():
    net = json.loads((SCENARIOS / "relu_controller.json").read_text())
    layers = [(np.array(l["w"], dtype=float), np.array(l["b"], dtype=float))
              for l in net["layers"]]
    lo, hi = net["saturate"]

    def forward(x):
        h = np.asarray(x, dtype=float)
        for i, (w, b) in enumerate(layers):
            h = w @ h + b
            if i < len(layers) - 1:
                h = np.maximum(h, 0.0)
        return np.clip(h, lo, hi)

    return layers, (float(lo), float(hi)), forward


def test_pendulum_closed_loop_containment():
    start = time.perf_counter()
    sc = load_scenario(SCENARIOS / "pendulum.json")
    pipe = build_pipeline(sc)
    trace = reach(pipe.phi, HybridZonotope.from_box(sc.initial_box),
                  sc.steps, sc.reduce_every,
                  hull=CellwiseCertifier(pipe.phi, grid=sc.hull_grid))
    assert trace.error is None and trace.n_steps == 5

    _, _, controller = _load_controller()

    def step(x, u):
        angle, speed = x
        return np.array([
            angle + 0.1 * speed + 0.005 * u[0] + 0.05 * np.sin(angle),
            speed + np.sin(angle) + 0.1 * u[0] + 0.05 * np.cos(angle) * speed,
        ])

    rng = np.random.default_rng(808)
    failures = 0
    for _ in range(200):
        x = rng.uniform(sc.initial_box.lo, sc.initial_box.hi)
        xs, us = [x], []
        for _k in range(5):
            u = controller(xs[-1])
            us.append(u)
            xs.append(step(xs[-1], u))
        xs_a, us_a = np.array(xs), np.array(us)
        for k in range(6):
            seed = (trajectory_binaries(pipe.phi, trace, k, xs_a, us_a)
                    if k else None)
            res = contains_point(trace.sets[k], xs_a[k],
                                 tols=Tolerances(membership=1e-7),
                                 enum_cap=max(25, trace.sets[k].nb),
                                 seed_binaries=seed)
            failures += res.status != "member"
    assert failures == 0
    assert time.perf_counter() - start < 600.0


# ---------------------------------------------------------------------------
# boolean exactness


def _bit_vectors(width):
    return [tuple((i >> j) & 1 for j in range(width)) for i in range(2 ** width)]


def _bool_step_all(state, inputs):
    """All 512 successors of one state under the three-bit block update."""
    y = np.zeros_like(inputs)
    for j in range(3):
        s0, s1, s2 = state[j], state[3 + j], state[6 + j]
        a0, a1, a2 = inputs[:, j], inputs[:, 3 + j], inputs[:, 6 + j]
        y[:, j] = a0 | (1 ^ s1 ^ s0)
        y[:, 3 + j] = 1 ^ s1 ^ (s0 & a1)
        y[:, 6 + j] = 1 ^ (s2 & (1 ^ a1 ^ a2))
    return y


def _truth_iteration(n_steps):
    """Exhaustive image iteration; keeps one (pred, input) witness per state."""
    inputs = np.array(_bit_vectors(9), dtype=int)
    levels = [{(0,) * 9: None}]
    for _ in range(n_steps):
        nxt = {}
        for state in levels[-1]:
            succ = _bool_step_all(np.array(state, dtype=int), inputs)
            for row, u in zip(succ, inputs):
                key = tuple(int(b) for b in row)
                if key not in nxt:
                    nxt[key] = (state, tuple(int(b) for b in u))
        levels.append(nxt)
    return levels


def _witness_chain(levels, k, state):
    xs, us = [state], []
    while k > 0:
        prev, u = levels[k][xs[0]]
        xs.insert(0, prev)
        us.insert(0, u)
        k -= 1
    return np.array(xs, dtype=float), np.array(us, dtype=float)


def test_boolean_reach_exactness():
    start = time.perf_counter()
    sc = load_scenario(SCENARIOS / "boolean3.json")
    pipe = build_pipeline(sc)
    trace = reach(pipe.phi, HybridZonotope.from_box(sc.initial_box), 5, None,
                  hull=DomainBoxHull(pipe.phi))
    assert trace.error is None

    levels = _truth_iteration(5)
    vertices = _bit_vectors(9)
    mismatches = 0
    for k in range(6):
        z = trace.sets[k]
        cap = max(25, z.nb)
        for v in vertices:
            expected = v in levels[k]
            seed = None
            if expected and k >= 1:
                xs, us = _witness_chain(levels, k, v)
                seed = trajectory_binaries(pipe.phi, trace, k, xs, us)
            res = contains_point(z, np.array(v, dtype=float),
                                 seed_binaries=seed, enum_cap=cap)
            mismatches += (res.status == "member") != expected
    assert mismatches == 0
    assert time.perf_counter() - start < 120.0

    # longer horizon: per-step time stays polynomial in k
    long_trace = reach(pipe.phi, HybridZonotope.from_box(sc.initial_box),
                       10, None, hull=DomainBoxHull(pipe.phi))
    t = np.maximum(np.array(long_trace.step_seconds[1:]), 1e-3)
    k = np.arange(1, len(t) + 1, dtype=float)
    slope = np.polyfit(np.log(k), np.log(t), 1)[0]
    assert slope <= 3.0
    assert t.max() <= 1.0


# ---------------------------------------------------------------------------
# relu controller map exactness


def test_relu_map_exactness():
    layers, sat, forward = _load_controller()
    box = IntervalBox([-4.0, -8.0], [4.0, 8.0])
    theta = build_state_input_map(nn_decomposition(layers, 2, saturate=sat),
                                  box)
    assert theta.over_approx is False

    rng = np.random.default_rng(909)
    cap = max(25, theta.set.nb)
    bad_reject = bad_accept = 0
    for _ in range(500):
        x = rng.uniform(box.lo, box.hi)
        u = forward(x)
        seed = witness_binaries(theta.graph, x)
        on = contains_point(theta.set, np.concatenate([x, u]),
                            seed_binaries=seed, enum_cap=cap)
        bad_reject += on.status != "member"
        off = contains_point(theta.set, np.concatenate([x, u + 0.01]),
                             enum_cap=cap)
        bad_accept += off.status != "non_member"
    assert bad_reject == 0
    assert bad_accept == 0
