"""Scenario files: schema, pipeline orchestration, and artifact emission.

A scenario JSON describes either a closed-loop reach run (plant + controller
or free inputs + initial box + step count) or a static set construction
(plant only).  Running one produces, under the output directory:

  trace.json       reach trace plus metadata needed for count audits
  complexity.csv   per-step counts and wall-clock
  plots/*.json     polygon data for requested 2-D projections
  report.txt       domain checks, count audit, self-test outcomes

All files are written atomically (temp file + rename) and are deterministic
for a fixed scenario except for timing fields.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .complexity import verify_trace_recurrence
from .graphs import (
    ApproxPolicy,
    Atom,
    Decomposition,
    boolean_atom,
    comparison_atom,
    evaluate_outputs,
    load_nn_json,
    nn_decomposition,
    witness_binaries,
)
from .query import (
    DEFAULT_ENUM_CAP,
    DEFAULT_TOLS,
    EnumerationCapError,
    Tolerances,
    contains_point,
    interval_hull,
    polygon_2d,
    support_relaxed,
)
from .reach import (
    CellwiseCertifier,
    DomainBoxHull,
    DomainCheckError,
    ReachTrace,
    StateUpdateSet,
    build_open_sus,
    build_state_input_map,
    close_loop,
    free_input_map,
    reach,
    trajectory_binaries,
)
from .sets import HybridZonotope, IntervalBox, SchemaError, linear_map

__all__ = [
    "EXIT_OK",
    "EXIT_SCHEMA",
    "EXIT_DOMAIN",
    "EXIT_CAP",
    "Scenario",
    "RunResult",
    "load_scenario",
    "build_pipeline",
    "run_scenario",
    "atomic_write",
]

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_DOMAIN = 3
EXIT_CAP = 4


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise SchemaError(msg)


def _load_box(d, name: str) -> IntervalBox:
    _require(isinstance(d, dict) and "lo" in d and "hi" in d,
             f"{name} must be an object with 'lo' and 'hi' arrays")
    try:
        return IntervalBox(np.asarray(d["lo"], dtype=float),
                           np.asarray(d["hi"], dtype=float))
    except (TypeError, ValueError) as e:
        raise SchemaError(f"bad {name}: {e}") from e


def _load_atoms(items) -> dict[str, Atom]:
    atoms: dict[str, Atom] = {}
    for item in items or ():
        kind = item.get("kind") if isinstance(item, dict) else None
        if kind == "gate":
            try:
                atom = boolean_atom(str(item.get("gate", "")))
            except ValueError as e:
                raise SchemaError(f"bad gate atom: {e}") from e
        elif kind == "compare":
            try:
                atom = comparison_atom(float(item["lo"]), float(item["hi"]))
            except (KeyError, TypeError, ValueError) as e:
                raise SchemaError(f"bad compare atom: {e}") from e
        else:
            raise SchemaError(f"unknown atom kind in {item}")
        _require(atom.label not in atoms, f"duplicate atom label '{atom.label}'")
        atoms[atom.label] = atom
    return atoms


def _load_approx(d) -> ApproxPolicy | None:
    if d is None:
        return None
    _require(isinstance(d, dict), "approx must be an object")
    overrides = {int(k): int(v) for k, v in (d.get("overrides") or {}).items()}
    return ApproxPolicy(default_nv=int(d.get("nv", 21)),
                        nv_overrides=overrides,
                        inflate_errors=bool(d.get("inflate", True)))


@dataclass
class Scenario:
    """Validated scenario description; `raw` keeps the original JSON."""

    name: str
    kind: str                       # "reach" | "static"
    atoms: dict[str, Atom]
    plant: Decomposition
    plant_box: IntervalBox
    plant_approx: ApproxPolicy | None
    remainder: IntervalBox | None
    controller: Decomposition | None
    controller_box: IntervalBox | None
    controller_approx: ApproxPolicy | None
    controller_net: list | None     # (W, b) layers for numeric simulation
    controller_sat: tuple[float, float] | None
    input_box: IntervalBox | None
    initial_box: IntervalBox | None
    steps: int
    reduce_every: int | None
    hull_mode: str
    hull_grid: int
    enum_cap: int | None
    plots: list[dict] = field(default_factory=list)
    queries: list[dict] = field(default_factory=list)
    self_test: dict = field(default_factory=dict)
    base_dir: Path = Path(".")
    raw: dict = field(default_factory=dict)


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario file; raises SchemaError on problems."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as e:
        raise SchemaError(f"cannot read scenario: {e}") from e
    except json.JSONDecodeError as e:
        raise SchemaError(f"scenario is not valid JSON: {e}") from e
    _require(isinstance(raw, dict), "scenario must be a JSON object")

    name = raw.get("name")
    _require(isinstance(name, str) and name, "scenario needs a 'name'")
    kind = raw.get("kind", "reach")
    _require(kind in ("reach", "static"), f"unknown scenario kind '{kind}'")

    atoms = _load_atoms(raw.get("atoms"))

    plant_spec = raw.get("plant")
    _require(isinstance(plant_spec, dict), "scenario needs a 'plant' object")
    _require("decomposition" in plant_spec, "plant needs a 'decomposition'")
    plant = Decomposition.from_dict(plant_spec["decomposition"], atoms)
    plant_box = _load_box(plant_spec.get("box"), "plant.box")
    _require(plant_box.dim == plant.n_inputs,
             f"plant.box has dim {plant_box.dim}, decomposition has "
             f"{plant.n_inputs} inputs")
    plant_approx = _load_approx(plant_spec.get("approx"))
    remainder = (None if plant_spec.get("remainder") is None
                 else _load_box(plant_spec["remainder"], "plant.remainder"))

    controller = controller_box = controller_approx = None
    controller_net = controller_sat = None
    ctrl_spec = raw.get("controller")
    input_box = (None if raw.get("input_set") is None
                 else _load_box(raw["input_set"], "input_set"))
    if ctrl_spec is not None:
        _require(isinstance(ctrl_spec, dict), "controller must be an object")
        _require(input_box is None,
                 "give either a controller or an input_set, not both")
        controller_box = _load_box(ctrl_spec.get("box"), "controller.box")
        if "network" in ctrl_spec:
            net = ctrl_spec["network"]
            if isinstance(net, dict) and "file" in net:
                net_path = (path.parent / net["file"]).resolve()
                try:
                    net = json.loads(net_path.read_text())
                except (OSError, json.JSONDecodeError) as e:
                    raise SchemaError(f"cannot read network file: {e}") from e
            layers, sat = load_nn_json(net)
            controller = nn_decomposition(layers, controller_box.dim,
                                          saturate=sat)
            controller_net, controller_sat = layers, sat
        elif "decomposition" in ctrl_spec:
            controller = Decomposition.from_dict(ctrl_spec["decomposition"], atoms)
            _require(controller.n_inputs == controller_box.dim,
                     "controller box/decomposition dimension mismatch")
        else:
            raise SchemaError("controller needs a 'network' or a 'decomposition'")
        controller_approx = _load_approx(ctrl_spec.get("approx"))

    steps = int(raw.get("steps", 0))
    _require(steps >= 0, "steps must be nonnegative")
    if kind == "reach":
        _require(ctrl_spec is not None or input_box is not None,
                 "reach scenarios need a controller or an input_set")
        initial_box = _load_box(raw.get("initial_set"), "initial_set")
    else:
        initial_box = None
        _require(ctrl_spec is None and input_box is None and steps == 0,
                 "static scenarios take only a plant")

    reduce_every = raw.get("reduce_every")
    if reduce_every is not None:
        reduce_every = int(reduce_every)
        _require(reduce_every >= 1, "reduce_every must be >= 1")

    hull_spec = raw.get("hull") or {}
    hull_mode = hull_spec.get("mode", "exact")
    _require(hull_mode in ("exact", "relaxed", "cellwise", "domain"),
             f"unknown hull mode '{hull_mode}'")
    hull_grid = int(hull_spec.get("grid", 32))

    plots = []
    for p in raw.get("plots") or ():
        _require(isinstance(p, dict) and "dims" in p, "plot request needs 'dims'")
        dims = [int(v) for v in p["dims"]]
        _require(len(dims) == 2, "plot dims must have two entries")
        plots.append({"dims": dims, "dirs": int(p.get("dirs", 64)),
                      "steps": p.get("steps"),
                      "mode": p.get("mode", "auto")})

    queries = []
    for q in raw.get("queries") or ():
        qk = q.get("kind") if isinstance(q, dict) else None
        _require(qk in ("member", "support"),
                 f"query kind must be 'member' or 'support', got {qk!r}")
        key = "point" if qk == "member" else "direction"
        _require(key in q, f"{qk} query needs a '{key}'")
        queries.append({"kind": qk,
                        key: [float(v) for v in q[key]],
                        "step": q.get("step")})

    enum_cap = raw.get("enum_cap")
    return Scenario(
        name=name, kind=kind, atoms=atoms,
        plant=plant, plant_box=plant_box, plant_approx=plant_approx,
        remainder=remainder,
        controller=controller, controller_box=controller_box,
        controller_approx=controller_approx,
        controller_net=controller_net, controller_sat=controller_sat,
        input_box=input_box, initial_box=initial_box,
        steps=steps, reduce_every=reduce_every,
        hull_mode=hull_mode, hull_grid=hull_grid,
        enum_cap=None if enum_cap is None else int(enum_cap),
        plots=plots, queries=queries, self_test=raw.get("self_test") or {},
        base_dir=path.parent, raw=raw,
    )


# ---------------------------------------------------------------------------
# pipeline


@dataclass
class Pipeline:
    scenario: Scenario
    psi: StateUpdateSet
    theta: StateUpdateSet | None
    phi: StateUpdateSet | None
    n_x: int
    n_u: int

    def controller_output(self, x: np.ndarray) -> np.ndarray:
        sc = self.scenario
        if sc.controller_net is not None:
            h = np.asarray(x, dtype=float)
            for i, (W, b) in enumerate(sc.controller_net):
                h = np.atleast_2d(W) @ h + np.atleast_1d(b)
                if i < len(sc.controller_net) - 1:
                    h = np.maximum(h, 0.0)
            if sc.controller_sat is not None:
                h = np.clip(h, sc.controller_sat[0], sc.controller_sat[1])
            return h
        if sc.controller is not None:
            return evaluate_outputs(sc.controller, x)
        raise ValueError("scenario has no controller")

    def plant_output(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return evaluate_outputs(self.scenario.plant,
                                np.concatenate([np.atleast_1d(x),
                                                np.atleast_1d(u)]))


def build_pipeline(sc: Scenario) -> Pipeline:
    psi = build_open_sus(sc.plant, sc.plant_box, sc.plant_approx,
                         remainder=sc.remainder)
    if sc.kind == "static":
        return Pipeline(sc, psi, None, None, psi.n_x, psi.n_u)
    if sc.controller is not None:
        theta = build_state_input_map(sc.controller, sc.controller_box,
                                      sc.controller_approx)
    else:
        n_x = psi.n_x
        state_box = IntervalBox(sc.plant_box.lo[:n_x], sc.plant_box.hi[:n_x])
        theta = free_input_map(state_box, sc.input_box)
    phi = close_loop(psi, theta)
    return Pipeline(sc, psi, theta, phi, psi.n_x, psi.n_u)


def _hull_provider(sc: Scenario, phi: StateUpdateSet | None):
    if sc.hull_mode in ("cellwise", "domain"):
        if phi is None:
            raise SchemaError(f"{sc.hull_mode} hull needs a closed loop")
        if sc.hull_mode == "cellwise":
            return CellwiseCertifier(phi, grid=sc.hull_grid)
        return DomainBoxHull(phi)
    return sc.hull_mode


# ---------------------------------------------------------------------------
# artifacts


def atomic_write(path, text: str) -> None:
    """Write-temp-rename so a crash never leaves a half-written artifact."""
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp-{os.getpid()}")
    tmp.write_text(text)
    os.replace(tmp, path)


def _json_dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True)


def write_trace(path, sc: Scenario, pipe: Pipeline, trace: ReachTrace) -> None:
    doc = {
        "schema": "hyzo-trace-1",
        "name": sc.name,
        "kind": sc.kind,
        "n_x": pipe.n_x,
        "phi_counts": (list(pipe.phi.set.counts.as_tuple())
                       if pipe.phi is not None else None),
        "over_approx": (pipe.phi.over_approx if pipe.phi is not None
                        else pipe.psi.over_approx),
        "trace": trace.to_dict(),
    }
    atomic_write(path, _json_dump(doc))


def write_complexity_csv(path, trace: ReachTrace) -> None:
    lines = ["k,n_g,n_b,n_c,wall_ms"]
    for k, c in enumerate(trace.counts):
        ms = trace.step_seconds[k] * 1e3 if k < len(trace.step_seconds) else 0.0
        lines.append(f"{k},{c.ng},{c.nb},{c.nc},{ms:.3f}")
    atomic_write(path, "\n".join(lines) + "\n")


def piece_dicts(pieces) -> list[dict]:
    return [{
        "polygons": [p.vertices.tolist()],
        "assignment": None if p.assignment is None else list(p.assignment),
        "over_approx": bool(p.over_approx),
    } for p in pieces]


def _projection(z: HybridZonotope, dims) -> HybridZonotope:
    P = np.zeros((2, z.n))
    P[0, dims[0]] = 1.0
    P[1, dims[1]] = 1.0
    return linear_map(P, z)


def write_plots(plot_dir: Path, sc: Scenario, trace: ReachTrace,
                tols: Tolerances, enum_cap: int) -> list[str]:
    written = []
    plot_dir.mkdir(parents=True, exist_ok=True)
    for req in sc.plots:
        dims = req["dims"]
        steps = req["steps"]
        if steps is None:
            steps = list(range(len(trace.sets)))
        for k in steps:
            if not 0 <= k < len(trace.sets):
                continue
            z = _projection(trace.sets[k], dims)
            mode = req["mode"]
            if mode == "auto":
                mode = "exact" if z.nb <= enum_cap else "relaxed"
            pieces = polygon_2d(z, req["dirs"], tols=tols, enum_cap=enum_cap,
                                mode=mode)
            doc = {"schema": "hyzo-polygons-1", "name": sc.name, "step": k,
                   "dims": dims, "mode": mode, "pieces": piece_dicts(pieces)}
            fname = f"step{k}_dims{dims[0]}-{dims[1]}.json"
            atomic_write(plot_dir / fname, _json_dump(doc))
            written.append(fname)
    return written


# ---------------------------------------------------------------------------
# self-tests


def _selftest_trajectories(pipe: Pipeline, trace: ReachTrace,
                           tols: Tolerances, spec: dict) -> dict:
    """Simulate closed-loop runs and check membership in every step's set."""
    sc = pipe.scenario
    count = int(spec.get("count", 50))
    rng = np.random.default_rng(int(spec.get("seed", 0)))
    n_steps = trace.n_steps
    checked = failures = 0
    for _ in range(count):
        x = rng.uniform(sc.initial_box.lo, sc.initial_box.hi)
        xs, us = [x], []
        for _k in range(n_steps):
            u = pipe.controller_output(xs[-1])
            us.append(u)
            xs.append(pipe.plant_output(xs[-1], u))
        xs_a, us_a = np.array(xs), np.array(us)
        for k in range(n_steps + 1):
            seed = None
            if k >= 1:
                seed = trajectory_binaries(pipe.phi, trace, k, xs_a, us_a)
            res = contains_point(trace.sets[k], xs_a[k], tols=tols,
                                 enum_cap=max(DEFAULT_ENUM_CAP,
                                              trace.sets[k].nb),
                                 seed_binaries=seed)
            checked += 1
            if res.status != "member":
                failures += 1
    return {"kind": "trajectories", "checked": checked,
            "failures": failures, "ok": failures == 0}


def _bit_tuples(width: int) -> list[tuple[float, ...]]:
    return [tuple(float((i >> j) & 1) for j in range(width))
            for i in range(2 ** width)]


def _boolean_truth_iteration(pipe: Pipeline, n_steps: int) -> list[set]:
    """Brute-force image iteration over binary states and inputs.

    Starts from the binary vertices inside the initial box and also
    returns, per step, one (predecessor, input) witness per state so
    membership checks can be seeded with a concrete trajectory.
    """
    box = pipe.scenario.initial_box
    start = [t for t in _bit_tuples(pipe.n_x)
             if np.all(box.lo <= np.array(t)) and np.all(np.array(t) <= box.hi)]
    inputs = _bit_tuples(pipe.n_u)
    reach_sets: list[dict] = [{s: None for s in start}]
    for _ in range(n_steps):
        nxt: dict = {}
        for x in reach_sets[-1]:
            for u in inputs:
                y = pipe.plant_output(np.array(x), np.array(u))
                key = tuple(float(round(v)) for v in y)
                if key not in nxt:
                    nxt[key] = (x, u)
        reach_sets.append(nxt)
    return reach_sets


def _witness_chain(truth: list[dict], k: int, state) -> tuple[np.ndarray, np.ndarray]:
    """Reconstruct one (states, inputs) trajectory reaching `state` at step k."""
    xs = [state]
    us = []
    j = k
    while j > 0:
        prev, u = truth[j][xs[0]]
        xs.insert(0, prev)
        us.insert(0, u)
        j -= 1
    return np.array(xs, dtype=float), np.array(us, dtype=float)


def _selftest_boolean(pipe: Pipeline, trace: ReachTrace,
                      tols: Tolerances, spec: dict) -> dict:
    """Exhaustive two-sided comparison against truth-table iteration.

    Expected members are checked with a trajectory-seeded query; expected
    non-members must be refuted by the full branching search.
    """
    truth = _boolean_truth_iteration(pipe, trace.n_steps)
    vertices = _bit_tuples(pipe.n_x)
    mism = checked = 0
    for k in range(1, trace.n_steps + 1):
        z = trace.sets[k]
        cap = max(DEFAULT_ENUM_CAP, z.nb)
        for v in vertices:
            expected = v in truth[k]
            seed = None
            if expected:
                xs, us = _witness_chain(truth, k, v)
                seed = trajectory_binaries(pipe.phi, trace, k, xs, us)
            res = contains_point(z, np.array(v), tols=tols, enum_cap=cap,
                                 seed_binaries=seed)
            checked += 1
            if (res.status == "member") != expected:
                mism += 1
    return {"kind": "boolean_exact", "checked": checked,
            "mismatches": mism, "ok": mism == 0}


def _selftest_static_samples(pipe: Pipeline, trace: ReachTrace,
                             tols: Tolerances, spec: dict) -> dict:
    """Sample plant inputs and check (args, outputs) membership.

    `points` adds deterministic input probes; `pairs` adds explicit
    (x, y, member?) probes for behavior evaluation cannot pick, such as
    the second branch of an exact tie.
    """
    sc = pipe.scenario
    count = int(spec.get("count", 100))
    rng = np.random.default_rng(int(spec.get("seed", 0)))
    z = trace.sets[0]
    failures = checked = 0

    def check(point, expect_member, seed=None):
        nonlocal failures, checked
        res = contains_point(z, point, tols=tols,
                             enum_cap=max(DEFAULT_ENUM_CAP, z.nb),
                             seed_binaries=seed)
        checked += 1
        if (res.status == "member") != expect_member:
            failures += 1

    pts = sc.plant_box.sample(rng, count)
    extra = [np.asarray(p, dtype=float) for p in spec.get("points", ())]
    for x in list(pts) + extra:
        y = evaluate_outputs(sc.plant, x)
        seed = witness_binaries(pipe.psi.graph, x) if pipe.psi.graph else None
        check(np.concatenate([x, y]), True, seed)
    for pair in spec.get("pairs", ()):
        x = np.asarray(pair["x"], dtype=float)
        y = np.asarray(pair["y"], dtype=float)
        check(np.concatenate([x, y]), bool(pair.get("member", True)))
    return {"kind": "samples", "checked": checked,
            "failures": failures, "ok": failures == 0}


_SELFTESTS = {
    "trajectories": _selftest_trajectories,
    "boolean_exact": _selftest_boolean,
    "samples": _selftest_static_samples,
}


# ---------------------------------------------------------------------------
# runner


@dataclass
class RunResult:
    exit_code: int
    out_dir: Path
    trace: ReachTrace | None
    messages: list[str]
    self_test: dict | None = None


def run_scenario(path, out_dir=None, *,
                 tols: Tolerances = DEFAULT_TOLS,
                 enum_cap: int | None = None,
                 self_test: bool = False) -> RunResult:
    """Execute a scenario file and write its artifacts.

    Returns exit code 0 on success, 3 when a domain check truncates the
    trace (partial artifacts are still written), 4 on an enumeration-cap
    refusal.  Schema problems raise SchemaError; the CLI maps them to 2.
    """
    sc = load_scenario(path)
    out = Path(out_dir) if out_dir is not None else Path(f"{sc.name}_out")
    out.mkdir(parents=True, exist_ok=True)
    cap = enum_cap if enum_cap is not None else (sc.enum_cap or DEFAULT_ENUM_CAP)
    messages: list[str] = []

    try:
        pipe = build_pipeline(sc)
    except DomainCheckError as e:
        messages.append(f"domain check: {e}")
        atomic_write(out / "report.txt",
                     f"scenario: {sc.name}\nerror: {e}\n")
        return RunResult(EXIT_DOMAIN, out, None, messages)
    try:
        if sc.kind == "static":
            z = pipe.psi.set
            hull = interval_hull(z, tols=tols, enum_cap=max(cap, z.nb),
                                 mode="relaxed")
            trace = ReachTrace(sets=[z], counts=[z.counts],
                               hull_boxes=[hull], step_seconds=[0.0])
        else:
            provider = _hull_provider(sc, pipe.phi)
            trace = reach(pipe.phi, HybridZonotope.from_box(sc.initial_box),
                          sc.steps, sc.reduce_every, tols=tols,
                          enum_cap=cap, hull=provider)
    except EnumerationCapError as e:
        messages.append(f"enumeration cap: {e}")
        return RunResult(EXIT_CAP, out, None, messages)

    write_trace(out / "trace.json", sc, pipe, trace)
    write_complexity_csv(out / "complexity.csv", trace)
    try:
        plot_files = write_plots(out / "plots", sc, trace, tols, cap)
    except EnumerationCapError as e:
        messages.append(f"enumeration cap while plotting: {e}")
        return RunResult(EXIT_CAP, out, trace, messages)
    messages.append(f"wrote {len(plot_files)} plot file(s)")

    query_results = []
    for q in sc.queries:
        k = q["step"] if q["step"] is not None else len(trace.sets) - 1
        if not 0 <= k < len(trace.sets):
            query_results.append({**q, "result": "step out of range"})
            continue
        z = trace.sets[k]
        if q["kind"] == "member":
            res = contains_point(z, np.array(q["point"]), tols=tols,
                                 enum_cap=max(cap, z.nb))
            query_results.append({**q, "result": res.status})
        else:
            val = support_relaxed(z, np.array(q["direction"]), tols=tols)
            query_results.append({**q, "result": float(val),
                                  "bound": "outer"})

    test_result = None
    if self_test and sc.self_test:
        kind = sc.self_test.get("kind")
        fn = _SELFTESTS.get(kind)
        if fn is None:
            raise SchemaError(f"unknown self_test kind '{kind}'")
        test_result = fn(pipe, trace, tols, sc.self_test)
        messages.append(f"self-test {kind}: "
                        f"{'ok' if test_result['ok'] else 'FAILED'}")

    audit = None
    if pipe.phi is not None and len(trace.counts) > 1:
        audit = verify_trace_recurrence(trace, pipe.phi)

    report = _render_report(sc, pipe, trace, audit, test_result, query_results)
    atomic_write(out / "report.txt", report)

    code = EXIT_OK if trace.error is None else EXIT_DOMAIN
    if trace.error is not None:
        messages.append(trace.error)
    if test_result is not None and not test_result["ok"]:
        code = code or 1
    return RunResult(code, out, trace, messages, test_result)


def _render_report(sc: Scenario, pipe: Pipeline, trace: ReachTrace,
                   audit, test_result, query_results=()) -> str:
    lines = [f"scenario: {sc.name}", f"kind: {sc.kind}"]
    if pipe.phi is not None:
        lines.append(f"update-set counts: {pipe.phi.set.counts.as_tuple()}")
        lines.append(f"over-approximation: {pipe.phi.over_approx}")
    else:
        lines.append(f"set counts: {pipe.psi.set.counts.as_tuple()}")
        lines.append(f"over-approximation: {pipe.psi.over_approx}")
    lines.append(f"steps computed: {trace.n_steps}")
    lines.append(f"reduction steps: {trace.reduction_steps}")
    lines.append("domain checks: "
                 + (" ".join("pass" if b else "FAIL" for b in trace.domain_checks)
                    or "none"))
    for k, b in enumerate(trace.hull_boxes):
        lo = np.array2string(b.lo, precision=6)
        hi = np.array2string(b.hi, precision=6)
        lines.append(f"hull k={k}: {lo} .. {hi}")
    if audit is not None:
        lines.append(f"count recurrence: {'pass' if audit.ok else 'FAIL'}")
    for q in query_results:
        lines.append(f"query {json.dumps(q, sort_keys=True)}")
    if test_result is not None:
        lines.append(f"self-test: {json.dumps(test_result, sort_keys=True)}")
    if trace.error:
        lines.append(f"error: {trace.error}")
    lines.append("wall seconds per step: "
                 + " ".join(f"{t:.3f}" for t in trace.step_seconds))
    return "\n".join(lines) + "\n"
