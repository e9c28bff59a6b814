"""Functional decompositions and their set-valued graphs.

A decomposition lists intermediate variables w_j, each an input, an
affine combination of earlier variables, a unary nonlinear function of
one earlier variable, a two-argument gadget (product, quotient, power)
expanded into unary steps, or a multi-port atom given directly as a
hybrid zonotope relation.

The graph set over all variables starts from the input box and, per
nonlinear step, takes a Cartesian product with the propagated output
range followed by a generalized intersection with the step's lifted
relation; affine steps append rows to the linear map and cost nothing.
The assembled counts obey

    n_g = n + (new nonlinear dims) + sum of per-step n_g
    n_b =                            sum of per-step n_b
    n_c = sum of per-step (n_c + arity + outputs)
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .pwa import (ErrorBound, UnaryFuncSpec, build_sos, error_bound,
                  evaluate_kind, exact_pwa, inflate)
from .sets import (HybridZonotope, IntervalBox, SchemaError, cartesian_product,
                   generalized_intersection, linear_map, translate)
from .vpoly import VPolyCollection, to_hybrid_zonotope


class DomainError(ValueError):
    """A variable's interval reaches a singularity or is otherwise unusable."""


_PWA_KINDS = ("relu", "saturation", "affine")
GADGETS = ("product", "quotient", "power")


@dataclass(frozen=True)
class Atom:
    """A fixed input-output relation shipped as a hybrid zonotope.

    graph lives over (args..., outputs...); out_lo/out_hi bound the
    output coordinates over the whole relation (used for domain
    propagation); witness_points, when given, are representative
    (args, outs) columns matching the graph's binary blocks in order,
    used to seed binary assignments for membership certificates.
    """

    graph: HybridZonotope
    arity: int
    n_out: int
    exact: bool = True
    label: str = "atom"
    out_lo: tuple[float, ...] = ()
    out_hi: tuple[float, ...] = ()
    fn: object = None  # optional callable args -> outputs for simulation
    witness_points: np.ndarray | None = None  # (arity+n_out, n_b) columns

    def __post_init__(self):
        if self.graph.n != self.arity + self.n_out:
            raise ValueError("atom graph dimension must equal arity + outputs")
        if len(self.out_lo) != self.n_out or len(self.out_hi) != self.n_out:
            raise ValueError("atom needs output range metadata")

    def evaluate(self, args: np.ndarray) -> np.ndarray:
        if self.fn is None:
            raise ValueError(f"atom '{self.label}' has no pointwise semantics")
        out = np.atleast_1d(np.asarray(self.fn(*args), dtype=float))
        return out


@dataclass(frozen=True)
class Assignment:
    """One step of a decomposition; produces `width` new variables."""

    kind: str  # input | affine | unary | binary_gadget | atom
    args: tuple[int, ...] = ()
    func: str | None = None           # unary kind or gadget name
    params: tuple[float, ...] = ()
    coeffs: tuple[float, ...] = ()    # affine, aligned with args
    offset: float = 0.0
    atom: Atom | None = None
    declared_domain: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in ("input", "affine", "unary", "binary_gadget", "atom"):
            raise ValueError(f"unknown assignment kind '{self.kind}'")
        if self.kind == "unary" and (self.func is None or len(self.args) != 1):
            raise ValueError("unary assignment needs a function and one argument")
        if self.kind == "binary_gadget":
            if self.func not in GADGETS or len(self.args) != 2:
                raise ValueError("gadget assignment needs a gadget name and two arguments")
        if self.kind == "affine" and len(self.coeffs) != len(self.args):
            raise ValueError("affine coefficients must align with arguments")
        if self.kind == "atom" and self.atom is None:
            raise ValueError("atom assignment needs an atom")
        object.__setattr__(self, "args", tuple(int(a) for a in self.args))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        object.__setattr__(self, "coeffs", tuple(float(v) for v in self.coeffs))

    @property
    def width(self) -> int:
        return self.atom.n_out if self.kind == "atom" else 1

    @property
    def nonlinear(self) -> bool:
        return self.kind in ("unary", "binary_gadget", "atom")


def input_assignment() -> Assignment:
    return Assignment("input")


def unary(func: str, arg: int, params=(), declared_domain=None) -> Assignment:
    return Assignment("unary", (arg,), func=func, params=tuple(params),
                      declared_domain=declared_domain)


def affine(args, coeffs, offset: float = 0.0) -> Assignment:
    return Assignment("affine", tuple(args), coeffs=tuple(coeffs), offset=offset)


def gadget(name: str, a: int, b: int) -> Assignment:
    return Assignment("binary_gadget", (a, b), func=name)


def atom_step(atom: Atom, args) -> Assignment:
    if len(tuple(args)) != atom.arity:
        raise ValueError(f"atom '{atom.label}' expects {atom.arity} arguments")
    return Assignment("atom", tuple(args), atom=atom)


@dataclass(frozen=True)
class Decomposition:
    """Ordered variable assignments; the first n_inputs are inputs."""

    n_inputs: int
    assignments: tuple[Assignment, ...]
    output_indices: tuple[int, ...]

    def __post_init__(self):
        assignments = tuple(self.assignments)
        object.__setattr__(self, "assignments", assignments)
        object.__setattr__(self, "output_indices",
                           tuple(int(i) for i in self.output_indices))
        if len(assignments) < self.n_inputs or self.n_inputs < 1:
            raise ValueError("decomposition needs its inputs first")
        offsets = []
        total = 0
        for k, a in enumerate(assignments):
            if (k < self.n_inputs) != (a.kind == "input"):
                raise ValueError("exactly the first n_inputs assignments must be inputs")
            offsets.append(total)
            for j in a.args:
                if not 0 <= j < total:
                    raise ValueError(
                        f"assignment {k} references variable {j}, not an earlier one")
            total += a.width
        object.__setattr__(self, "_offsets", tuple(offsets))
        object.__setattr__(self, "_n_vars", total)
        for i in self.output_indices:
            if not 0 <= i < total:
                raise ValueError(f"output index {i} out of range")

    @property
    def n_vars(self) -> int:
        return self._n_vars

    def var_offset(self, k: int) -> int:
        """First variable index produced by assignment k."""
        return self._offsets[k]

    @property
    def n_outputs(self) -> int:
        return len(self.output_indices)

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        steps = []
        for a in self.assignments[self.n_inputs:]:
            d: dict = {"kind": a.kind, "args": list(a.args)}
            if a.kind == "unary":
                d["func"] = a.func
                if a.params:
                    d["params"] = list(a.params)
            elif a.kind == "binary_gadget":
                d["func"] = a.func
            elif a.kind == "affine":
                d["coeffs"] = list(a.coeffs)
                d["offset"] = a.offset
            elif a.kind == "atom":
                d["atom"] = a.atom.label
            if a.declared_domain is not None:
                d["domain"] = list(a.declared_domain)
            steps.append(d)
        return {"inputs": self.n_inputs, "assignments": steps,
                "outputs": list(self.output_indices)}

    @staticmethod
    def from_dict(d: dict, atoms: dict[str, Atom] | None = None) -> "Decomposition":
        try:
            n_in = int(d["inputs"])
            raw = d["assignments"]
            outs = [int(i) for i in d["outputs"]]
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaError(f"bad decomposition JSON: {e}") from e
        steps: list[Assignment] = [input_assignment() for _ in range(n_in)]
        for item in raw:
            kind = item.get("kind")
            args = tuple(int(a) for a in item.get("args", ()))
            dom = tuple(item["domain"]) if "domain" in item else None
            try:
                if kind == "unary":
                    steps.append(Assignment("unary", args, func=item["func"],
                                            params=tuple(item.get("params", ())),
                                            declared_domain=dom))
                elif kind == "binary_gadget":
                    steps.append(Assignment("binary_gadget", args, func=item["func"],
                                            declared_domain=dom))
                elif kind == "affine":
                    steps.append(Assignment("affine", args,
                                            coeffs=tuple(item.get("coeffs", ())),
                                            offset=float(item.get("offset", 0.0)),
                                            declared_domain=dom))
                elif kind == "atom":
                    name = item["atom"]
                    if atoms is None or name not in atoms:
                        raise SchemaError(f"unknown atom '{name}'")
                    steps.append(atom_step(atoms[name], args))
                else:
                    raise SchemaError(f"unknown assignment kind '{kind}'")
            except (KeyError, ValueError) as e:
                raise SchemaError(f"bad assignment {item}: {e}") from e
        try:
            return Decomposition(n_in, tuple(steps), tuple(outs))
        except ValueError as e:
            raise SchemaError(str(e)) from e

    @staticmethod
    def from_json(text: str, atoms: dict[str, Atom] | None = None) -> "Decomposition":
        return Decomposition.from_dict(json.loads(text), atoms)


def binary_gadget_decomposition(name: str) -> Decomposition:
    """Standalone decomposition of one gadget over inputs (x, y).

    product uses the quarter-square identity xy = ((x+y)^2 - (x-y)^2)/4;
    quotient first forms 1/y and multiplies; power routes through
    exp(y ln x) and therefore requires x > 0.
    """
    if name not in GADGETS:
        raise ValueError(f"unknown gadget '{name}'")
    ins = [input_assignment(), input_assignment()]
    if name == "product":
        steps = ins + [
            affine((0, 1), (1.0, 1.0)),       # w2 = x + y
            affine((0, 1), (1.0, -1.0)),      # w3 = x - y
            unary("square", 2),               # w4 = w2^2
            unary("square", 3),               # w5 = w3^2
            affine((4, 5), (0.25, -0.25)),    # w6 = (w4 - w5)/4 = x y
        ]
        return Decomposition(2, tuple(steps), (6,))
    if name == "quotient":
        steps = ins + [
            unary("reciprocal", 1),           # w2 = 1/y
            affine((0, 2), (1.0, 1.0)),       # w3 = x + w2
            affine((0, 2), (1.0, -1.0)),      # w4 = x - w2
            unary("square", 3),               # w5 = w3^2
            unary("square", 4),               # w6 = w4^2
            affine((5, 6), (0.25, -0.25)),    # w7 = (w5 - w6)/4 = x/y
        ]
        return Decomposition(2, tuple(steps), (7,))
    steps = ins + [
        unary("ln", 0),                       # w2 = ln x
        affine((1, 2), (1.0, 1.0)),           # w3 = y + w2
        affine((1, 2), (1.0, -1.0)),          # w4 = y - w2
        unary("square", 3),                   # w5 = w3^2
        unary("square", 4),                   # w6 = w4^2
        affine((5, 6), (0.25, -0.25)),        # w7 = (w5 - w6)/4 = y ln x
        unary("exp", 7),                      # w8 = exp(w7) = x^y
    ]
    return Decomposition(2, tuple(steps), (8,))


def expand(d: Decomposition) -> tuple[Decomposition, list[int]]:
    """Inline every gadget into unary/affine steps.

    Returns the expanded decomposition plus a map from original variable
    indices to expanded ones. Idempotent for gadget-free inputs.
    """
    if not any(a.kind == "binary_gadget" for a in d.assignments):
        return d, list(range(d.n_vars))
    var_map: list[int] = []
    steps: list[Assignment] = []
    total = 0
    for a in d.assignments:
        if a.kind != "binary_gadget":
            remapped_args = tuple(var_map[j] for j in a.args)
            steps.append(Assignment(a.kind, remapped_args, func=a.func,
                                    params=a.params, coeffs=a.coeffs,
                                    offset=a.offset, atom=a.atom,
                                    declared_domain=a.declared_domain))
            for w in range(a.width):
                var_map.append(total + w)
            total += a.width
            continue
        x, y = (var_map[j] for j in a.args)
        t = total
        if a.func == "product":
            steps.extend([
                affine((x, y), (1.0, 1.0)),
                affine((x, y), (1.0, -1.0)),
                unary("square", t),
                unary("square", t + 1),
                affine((t + 2, t + 3), (0.25, -0.25)),
            ])
            total += 5
        elif a.func == "quotient":
            steps.extend([
                unary("reciprocal", y),
                affine((x, t), (1.0, 1.0)),
                affine((x, t), (1.0, -1.0)),
                unary("square", t + 1),
                unary("square", t + 2),
                affine((t + 3, t + 4), (0.25, -0.25)),
            ])
            total += 6
        else:  # power
            steps.extend([
                unary("ln", x),
                affine((y, t), (1.0, 1.0)),
                affine((y, t), (1.0, -1.0)),
                unary("square", t + 1),
                unary("square", t + 2),
                affine((t + 3, t + 4), (0.25, -0.25)),
                unary("exp", t + 5),
            ])
            total += 7
        var_map.append(total - 1)  # the gadget's value is the last new variable
    outs = tuple(var_map[i] for i in d.output_indices)
    return Decomposition(d.n_inputs, tuple(steps), outs), var_map


# -- interval domain propagation -------------------------------------------


def _unary_interval(func: str, params, lo: float, hi: float,
                    who: str) -> tuple[float, float]:
    if func == "sin" or func == "cos":
        shift = 0.0 if func == "sin" else math.pi / 2.0
        a, b = lo + shift, hi + shift
        vals = [math.sin(a), math.sin(b)]
        if math.floor((a - math.pi / 2.0) / (2.0 * math.pi)) != \
           math.floor((b - math.pi / 2.0) / (2.0 * math.pi)):
            vals.append(1.0)
        if math.floor((a + math.pi / 2.0) / (2.0 * math.pi)) != \
           math.floor((b + math.pi / 2.0) / (2.0 * math.pi)):
            vals.append(-1.0)
        return min(vals), max(vals)
    if func == "square":
        v1, v2 = lo * lo, hi * hi
        mn = 0.0 if lo <= 0.0 <= hi else min(v1, v2)
        return mn, max(v1, v2)
    if func == "reciprocal":
        if lo <= 0.0 <= hi:
            raise DomainError(f"{who}: reciprocal over an interval containing 0")
        return min(1.0 / lo, 1.0 / hi), max(1.0 / lo, 1.0 / hi)
    if func == "exp":
        return math.exp(lo), math.exp(hi)
    if func == "ln":
        if lo <= 0.0:
            raise DomainError(f"{who}: ln over a non-positive interval")
        return math.log(lo), math.log(hi)
    if func == "relu":
        return max(lo, 0.0), max(hi, 0.0)
    if func == "saturation":
        slo, shi = params
        return min(max(lo, slo), shi), min(max(hi, slo), shi)
    if func == "affine":
        m, b0 = params
        v1, v2 = m * lo + b0, m * hi + b0
        return min(v1, v2), max(v1, v2)
    raise ValueError(f"unknown unary function '{func}'")


def _gadget_interval(name: str, ax: tuple[float, float], ay: tuple[float, float],
                     who: str) -> tuple[float, float]:
    xl, xh = ax
    yl, yh = ay
    if name == "product":
        cands = [xl * yl, xl * yh, xh * yl, xh * yh]
        return min(cands), max(cands)
    if name == "quotient":
        if yl <= 0.0 <= yh:
            raise DomainError(f"{who}: quotient over a divisor interval containing 0")
        cands = [xl / yl, xl / yh, xh / yl, xh / yh]
        return min(cands), max(cands)
    if xl <= 0.0:
        raise DomainError(f"{who}: power needs a strictly positive base interval")
    cands = [xl ** yl, xl ** yh, xh ** yl, xh ** yh]
    if xl <= 1.0 <= xh:
        cands.extend([1.0, 1.0])
    return min(cands), max(cands)


def propagate_domains(d: Decomposition, input_box: IntervalBox) -> list[tuple[float, float]]:
    """Per-variable interval bounds via interval arithmetic.

    Non-input intervals get 1e-12 relative outward padding. Gadget
    variables use the direct product/quotient/power interval rules,
    which are tighter than propagating through the expanded chain.
    """
    if input_box.dim != d.n_inputs:
        raise ValueError(f"input box has dim {input_box.dim}, expected {d.n_inputs}")
    iv: list[tuple[float, float]] = []

    def pad(lo: float, hi: float) -> tuple[float, float]:
        eps = 1e-12 * max(1.0, abs(lo), abs(hi))
        return lo - eps, hi + eps

    for k, a in enumerate(d.assignments):
        v = d.var_offset(k)
        who = f"w{v}"
        if a.kind == "input":
            lo, hi = float(input_box.lo[v]), float(input_box.hi[v])
        elif a.kind == "affine":
            lo = hi = a.offset
            for j, cf in zip(a.args, a.coeffs):
                jl, jh = iv[j]
                t1, t2 = cf * jl, cf * jh
                lo += min(t1, t2)
                hi += max(t1, t2)
            lo, hi = pad(lo, hi)
        elif a.kind == "unary":
            jl, jh = iv[a.args[0]]
            lo, hi = pad(*_unary_interval(a.func, a.params, jl, jh, who))
        elif a.kind == "binary_gadget":
            lo, hi = pad(*_gadget_interval(a.func, iv[a.args[0]], iv[a.args[1]], who))
        else:  # atom: static output ranges
            for o in range(a.atom.n_out):
                iv.append(pad(a.atom.out_lo[o], a.atom.out_hi[o]))
            continue
        if a.declared_domain is not None:
            dl, dh = a.declared_domain
            lo, hi = max(lo, dl), min(hi, dh)
            if lo > hi:
                raise DomainError(f"{who}: declared domain excludes the propagated range")
        iv.append((lo, hi))
    return iv


# -- graph assembly ---------------------------------------------------------


@dataclass(frozen=True)
class ApproxPolicy:
    """Per-step interpolation resolution and inflation switch.

    nv_overrides maps ORIGINAL assignment positions (before gadget
    expansion) to breakpoint counts; gadget-internal squares and other
    expanded steps inherit the gadget's override.
    """

    default_nv: int = 21
    nv_overrides: dict[int, int] = field(default_factory=dict)
    inflate_errors: bool = True

    def nv_for(self, original_index: int) -> int:
        return int(self.nv_overrides.get(original_index, self.default_nv))


@dataclass(frozen=True)
class StepInfo:
    """Witness metadata for one nonlinear step."""

    var: int                      # first output variable (expanded indexing)
    args: tuple[int, ...]
    n_binaries: int
    breakpoints: np.ndarray | None = None   # SOS steps
    atom: Atom | None = None
    error: ErrorBound | None = None


@dataclass(frozen=True)
class GraphSet:
    """Hybrid zonotope over all expanded variables, plus bookkeeping."""

    set: HybridZonotope
    domains: list[tuple[float, float]]
    exact: bool
    decomposition: Decomposition              # expanded form
    input_dims: tuple[int, ...]
    output_dims: tuple[int, ...]
    steps: tuple[StepInfo, ...]
    var_map: tuple[int, ...]                  # original var -> expanded var


def _selector(rows: list[int], width: int) -> np.ndarray:
    R = np.zeros((len(rows), width))
    for i, r in enumerate(rows):
        R[i, r] = 1.0
    return R


def build_graph(d: Decomposition, input_box: IntervalBox,
                approx: ApproxPolicy | None = None) -> GraphSet:
    """Assemble the joint set of all intermediate variables."""
    approx = approx or ApproxPolicy()
    dx, var_map = expand(d)
    # expanded steps inherit the nv override of the original they came from
    nv_of: dict[int, int] = {}
    pos = 0
    for k, a in enumerate(d.assignments):
        nv = approx.nv_for(k)
        n_expanded = 1
        if a.kind == "binary_gadget":
            n_expanded = {"product": 5, "quotient": 6, "power": 7}[a.func]
        for _ in range(n_expanded):
            nv_of[pos] = nv
            pos += 1
    domains = propagate_domains(dx, input_box)

    hz = HybridZonotope.from_box(input_box)
    dims = d.n_inputs
    exact = True
    steps: list[StepInfo] = []
    for k, a in enumerate(dx.assignments):
        if a.kind == "input":
            continue
        v = dx.var_offset(k)
        if a.kind == "affine":
            row = np.zeros(dims)
            for j, cf in zip(a.args, a.coeffs):
                row[j] = row[j] + cf
            R = np.vstack([np.eye(dims), row[None, :]])
            hz = linear_map(R, hz)
            if a.offset != 0.0:
                shift = np.zeros(dims + 1)
                shift[dims] = a.offset
                hz = translate(hz, shift)
            dims += 1
            continue
        if a.kind == "unary":
            jl, jh = domains[a.args[0]]
            f = UnaryFuncSpec(a.func, IntervalBox([jl], [jh]), a.params)
            if a.func in _PWA_KINDS:
                vp = exact_pwa(f)
                err = ErrorBound(0.0, 0.0, method="exact")
            else:
                vp = build_sos(f, nv_of[k])
                err = error_bound(f, nv_of[k])
                if not approx.inflate_errors:
                    err = ErrorBound(0.0, 0.0, method="exact")
                    exact = False  # bare interpolant is not the true graph
            H = to_hybrid_zonotope(vp)
            if err.a != 0.0 or err.b != 0.0:
                H = inflate(H, 1, err)
                exact = False
            out_box = HybridZonotope.from_interval(*domains[v])
            lifted = cartesian_product(hz, out_box)
            hz = generalized_intersection(
                lifted, H, _selector([a.args[0], dims], dims + 1))
            steps.append(StepInfo(v, a.args, H.nb,
                                  breakpoints=vp.v[0].copy(), error=err))
            dims += 1
            continue
        # atom step
        at = a.atom
        o = at.n_out
        lo = np.array([domains[v + i][0] for i in range(o)])
        hi = np.array([domains[v + i][1] for i in range(o)])
        lifted = cartesian_product(hz, HybridZonotope.from_box(IntervalBox(lo, hi)))
        sel = _selector(list(a.args) + [dims + i for i in range(o)], dims + o)
        hz = generalized_intersection(lifted, at.graph, sel)
        if not at.exact:
            exact = False
        steps.append(StepInfo(v, a.args, at.graph.nb, atom=at))
        dims += o

    out_dims = tuple(var_map[i] for i in d.output_indices)
    return GraphSet(hz, domains, exact, dx, tuple(range(d.n_inputs)),
                    out_dims, tuple(steps), tuple(var_map))


def project_io(g: GraphSet, d: Decomposition | None = None) -> HybridZonotope:
    """Keep the input block then the declared outputs; drop intermediates."""
    rows = list(g.input_dims) + list(g.output_dims)
    return linear_map(_selector(rows, g.set.n), g.set)


def evaluate(d: Decomposition, x) -> np.ndarray:
    """Numeric forward evaluation of every variable at an input point."""
    dx, _ = expand(d)
    x = np.asarray(x, dtype=float).ravel()
    if x.size != dx.n_inputs:
        raise ValueError("input dimension mismatch")
    w = np.zeros(dx.n_vars)
    w[: dx.n_inputs] = x
    for k, a in enumerate(dx.assignments):
        if a.kind == "input":
            continue
        v = dx.var_offset(k)
        if a.kind == "affine":
            w[v] = a.offset + sum(cf * w[j] for j, cf in zip(a.args, a.coeffs))
        elif a.kind == "unary":
            w[v] = float(evaluate_kind(a.func, a.params, w[a.args[0]]))
        else:
            outs = a.atom.evaluate(np.array([w[j] for j in a.args]))
            w[v: v + a.atom.n_out] = outs
    return w


def evaluate_outputs(d: Decomposition, x) -> np.ndarray:
    dx, var_map = expand(d)
    w = evaluate(d, x)
    return np.array([w[var_map[i]] for i in d.output_indices])


def _segment_one_hot(bp: np.ndarray, t: float) -> np.ndarray:
    nseg = bp.size - 1
    k = int(np.searchsorted(bp, t, side="right")) - 1
    k = min(max(k, 0), nseg - 1)
    xb = -np.ones(nseg)
    xb[k] = 1.0
    return xb


def witness_binaries(g: GraphSet, x) -> np.ndarray:
    """Binary assignment consistent with the trajectory of input x.

    Evaluates the decomposition numerically and selects, per nonlinear
    step, the active interpolation segment or atom branch. The result
    seeds membership queries so a single LP suffices for points known
    to come from a concrete input.
    """
    w = evaluate(g.decomposition, x)
    blocks: list[np.ndarray] = []
    for st in g.steps:
        if st.breakpoints is not None:
            blocks.append(_segment_one_hot(st.breakpoints, w[st.args[0]]))
        else:
            at = st.atom
            pts = at.witness_points
            if pts is None:
                raise ValueError(f"atom '{at.label}' cannot produce witnesses")
            vals = np.concatenate([
                [w[j] for j in st.args],
                w[st.var: st.var + at.n_out]])
            dist = np.max(np.abs(pts - vals[:, None]), axis=0)
            k = int(np.argmin(dist))
            xb = -np.ones(pts.shape[1])
            xb[k] = 1.0
            blocks.append(xb)
    if not blocks:
        return np.zeros(0)
    return np.concatenate(blocks)


# -- atom library -----------------------------------------------------------


_GATES = {
    "or": lambda p, q: float(bool(p) or bool(q)),
    "xnor": lambda p, q: float(bool(p) == bool(q)),
    "and": lambda p, q: float(bool(p) and bool(q)),
    "nand": lambda p, q: float(not (bool(p) and bool(q))),
}


def boolean_atom(gate: str) -> Atom:
    """Truth table of a two-input gate as a 4-point set in (p, q, out)."""
    gate = gate.lower()
    if gate not in _GATES:
        raise ValueError(f"unknown gate '{gate}'; have {sorted(_GATES)}")
    fn = _GATES[gate]
    cols = []
    for p, q in ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)):
        cols.append([p, q, fn(p, q)])
    V = np.array(cols).T
    hz = to_hybrid_zonotope(VPolyCollection(V, np.eye(4)))
    outs = V[2]
    return Atom(hz, 2, 1, exact=True, label=f"gate_{gate}",
                out_lo=(float(outs.min()),), out_hi=(float(outs.max()),),
                fn=lambda p, q: fn(round(p), round(q)), witness_points=V)


def comparison_atom(lo: float, hi: float) -> Atom:
    """Indicator of a >= b over [lo, hi]^2; ties belong to both branches.

    Two prisms over the triangles {a >= b} x {1} and {a <= b} x {0}.
    """
    if not lo < hi:
        raise ValueError("comparison needs a nondegenerate range")
    V = np.array([
        [lo, hi, hi, lo, lo, hi],
        [lo, lo, hi, lo, hi, hi],
        [1.0, 1.0, 1.0, 0.0, 0.0, 0.0],
    ])
    M = np.zeros((6, 2))
    M[:3, 0] = 1.0
    M[3:, 1] = 1.0
    hz = to_hybrid_zonotope(VPolyCollection(V, M))
    wit = np.array([
        [hi, lo],
        [lo, hi],
        [1.0, 0.0],
    ])
    return Atom(hz, 2, 1, exact=True, label="compare_ge",
                out_lo=(0.0,), out_hi=(1.0,),
                fn=lambda a, b: 1.0 if a >= b else 0.0, witness_points=wit)


def nn_decomposition(layers: list[tuple[np.ndarray, np.ndarray]], n_inputs: int,
                     saturate: tuple[float, float] | None = None) -> Decomposition:
    """Dense ReLU network as a decomposition; the last layer is linear.

    layers: (weight matrix, bias vector) pairs; ReLU follows every layer
    except the final one; optional saturation clamps each final output.
    """
    if not layers:
        raise ValueError("need at least one layer")
    steps: list[Assignment] = [input_assignment() for _ in range(n_inputs)]
    current = list(range(n_inputs))
    idx = n_inputs
    for li, (W, bvec) in enumerate(layers):
        W = np.atleast_2d(np.asarray(W, dtype=float))
        bvec = np.atleast_1d(np.asarray(bvec, dtype=float))
        if W.shape[1] != len(current):
            raise ValueError(
                f"layer {li} expects {W.shape[1]} inputs, feeding {len(current)}")
        if W.shape[0] != bvec.size:
            raise ValueError(f"layer {li} bias length mismatch")
        pre = []
        for r in range(W.shape[0]):
            steps.append(affine(tuple(current), tuple(W[r]), float(bvec[r])))
            pre.append(idx)
            idx += 1
        if li < len(layers) - 1:
            post = []
            for p in pre:
                steps.append(unary("relu", p))
                post.append(idx)
                idx += 1
            current = post
        else:
            current = pre
    if saturate is not None:
        lo, hi = saturate
        post = []
        for p in current:
            steps.append(unary("saturation", p, params=(lo, hi)))
            post.append(idx)
            idx += 1
        current = post
    return Decomposition(n_inputs, tuple(steps), tuple(current))


def load_nn_json(d: dict) -> tuple[list[tuple[np.ndarray, np.ndarray]],
                                   tuple[float, float] | None]:
    """Parse {"layers": [{"w": ..., "b": ...}], "saturate": [lo,hi] | null}."""
    try:
        layers = [(np.asarray(item["w"], dtype=float), np.asarray(item["b"], dtype=float))
                  for item in d["layers"]]
    except (KeyError, TypeError) as e:
        raise SchemaError(f"bad network JSON: {e}") from e
    sat = d.get("saturate")
    return layers, (float(sat[0]), float(sat[1])) if sat is not None else None
