"""Piecewise-affine function approximation on intervals.

A unary function is approximated by the polygonal chord interpolant
through evenly spaced breakpoints; the graph of that interpolant is a
union of segments, which vpoly turns into an exact hybrid zonotope.
Curvature-based error offsets [a, b] with f(x) - interp(x) in [a, b]
make the inflated graph a sound envelope of the true function graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sets import HybridZonotope, IntervalBox, SchemaError
from .vpoly import VPolyCollection, edges_incidence

KINDS = ("sin", "cos", "square", "reciprocal", "exp", "ln",
         "relu", "saturation", "affine")


def evaluate_kind(kind: str, params: tuple[float, ...], x):
    """Pointwise value of a named unary function; no domain checks."""
    x = np.asarray(x, dtype=float)
    if kind == "sin":
        return np.sin(x)
    if kind == "cos":
        return np.cos(x)
    if kind == "square":
        return x * x
    if kind == "reciprocal":
        return 1.0 / x
    if kind == "exp":
        return np.exp(x)
    if kind == "ln":
        return np.log(x)
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "saturation":
        lo, hi = params
        return np.clip(x, lo, hi)
    if kind == "affine":
        slope, offset = params
        return slope * x + offset
    raise ValueError(f"unknown function kind '{kind}'")


@dataclass(frozen=True)
class UnaryFuncSpec:
    """A unary function restricted to a bounded interval domain.

    params: saturation -> (lo, hi); affine -> (slope, offset); others -> ().
    """

    kind: str
    domain: IntervalBox
    params: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown function kind '{self.kind}'")
        if self.domain.dim != 1:
            raise ValueError("domain must be one-dimensional")
        params = tuple(float(p) for p in self.params)
        object.__setattr__(self, "params", params)
        lo, hi = self.lo, self.hi
        if self.kind == "reciprocal" and lo <= 0.0 <= hi:
            raise ValueError("reciprocal domain must exclude 0")
        if self.kind == "ln" and lo <= 0.0:
            raise ValueError("ln domain must be strictly positive")
        if self.kind == "saturation":
            if len(params) != 2 or params[0] > params[1]:
                raise ValueError("saturation needs params (lo, hi) with lo <= hi")
        if self.kind == "affine" and len(params) != 2:
            raise ValueError("affine needs params (slope, offset)")

    @property
    def lo(self) -> float:
        return float(self.domain.lo[0])

    @property
    def hi(self) -> float:
        return float(self.domain.hi[0])

    def __call__(self, x):
        return evaluate_kind(self.kind, self.params, x)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": list(self.params),
                "domain": [self.lo, self.hi]}

    @staticmethod
    def from_dict(d: dict) -> "UnaryFuncSpec":
        try:
            kind = d["kind"]
            lo, hi = d["domain"]
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaError(f"bad unary function JSON: {e}") from e
        try:
            return UnaryFuncSpec(kind, IntervalBox([lo], [hi]),
                                 tuple(d.get("params", ())))
        except ValueError as e:
            raise SchemaError(str(e)) from e


@dataclass(frozen=True)
class ErrorBound:
    """Offsets with f(x) - interp(x) in [a, b] on the whole domain."""

    a: float
    b: float
    method: str = "curvature"  # curvature | exact | sampled

    def __post_init__(self):
        if self.a > self.b:
            raise ValueError("error bound needs a <= b")

    @property
    def width(self) -> float:
        return self.b - self.a

    @property
    def magnitude(self) -> float:
        return max(abs(self.a), abs(self.b))


_PWA_KINDS = ("relu", "saturation", "affine")


def breakpoints(f: UnaryFuncSpec, n_v: int) -> np.ndarray:
    """Interpolation nodes: even spacing, except saturation snaps to its kinks."""
    if n_v < 2:
        raise ValueError("need at least 2 breakpoints")
    if f.kind == "saturation":
        lo, hi = f.params
        pts = {f.lo, f.hi}
        pts.update(k for k in (lo, hi) if f.lo < k < f.hi)
        return np.array(sorted(pts))
    return np.linspace(f.lo, f.hi, n_v)


def build_sos(f: UnaryFuncSpec, n_v: int) -> VPolyCollection:
    """Union-of-segments interpolant of the function graph."""
    xs = breakpoints(f, n_v)
    V = np.vstack([xs, f(xs)])
    return VPolyCollection(V, edges_incidence(xs.size))


def exact_pwa(f: UnaryFuncSpec) -> VPolyCollection:
    """Kink-aligned segments for piecewise-linear kinds; graph is exact."""
    if f.kind not in _PWA_KINDS:
        raise ValueError(f"'{f.kind}' is not piecewise linear")
    pts = {f.lo, f.hi}
    pts.update(k for k in _kinks(f) if f.lo < k < f.hi)
    xs = np.array(sorted(pts))
    if xs.size < 2:  # point domain: one zero-length segment
        xs = np.array([f.lo, f.hi])
    V = np.vstack([xs, f(xs)])
    return VPolyCollection(V, edges_incidence(xs.size))


def _interp(xs: np.ndarray, ys: np.ndarray, x) -> np.ndarray:
    return np.interp(np.asarray(x, dtype=float), xs, ys)


def _kinks(f: UnaryFuncSpec) -> list[float]:
    if f.kind == "relu":
        return [0.0]
    if f.kind == "saturation":
        return list(f.params)
    return []


def _second_derivative_range(f: UnaryFuncSpec, a: float, b: float) -> tuple[float, float]:
    """(min, max) of f'' over [a, b]; exact per kind."""
    k = f.kind
    if k == "square":
        return 2.0, 2.0
    if k == "exp":
        return math.exp(a), math.exp(b)
    if k == "ln":
        return -1.0 / (a * a), -1.0 / (b * b)
    if k == "reciprocal":
        v1, v2 = 2.0 / a ** 3, 2.0 / b ** 3
        return min(v1, v2), max(v1, v2)
    if k in ("sin", "cos"):
        # f'' is -sin or -cos; extremes occur at endpoints or interior
        # stationary points of the trig function (odd multiples of pi/2)
        shift = 0.0 if k == "sin" else math.pi / 2.0
        vals = [-math.sin(a + shift), -math.sin(b + shift)]
        j = math.ceil((a + shift) / math.pi - 0.5)
        while j * math.pi + math.pi / 2.0 <= b + shift + 1e-15:
            vals.append(-math.sin(j * math.pi + math.pi / 2.0))
            j += 1
        return min(vals), max(vals)
    raise ValueError(f"kind '{k}' has no curvature model")


def error_bound(f: UnaryFuncSpec, n_v: int) -> ErrorBound:
    """Sound offsets for the n_v-breakpoint interpolant of f.

    Piecewise-linear kinds get the exact extremes of f - interp (zero when
    every kink is a breakpoint). Twice-differentiable kinds get the chord
    bound h^2/8 * sup|f''| per segment, signed by the curvature sign so
    convex stretches only push the bound downward and concave ones upward.
    """
    xs = breakpoints(f, n_v)
    ys = f(xs)
    if f.kind in _PWA_KINDS:
        probe = list(xs)
        probe.extend(k for k in _kinks(f) if f.lo < k < f.hi)
        probe = np.array(sorted(set(probe)))
        gap = f(probe) - _interp(xs, ys, probe)
        return ErrorBound(min(float(gap.min()), 0.0), max(float(gap.max()), 0.0),
                          method="exact")
    a = b = 0.0
    for i in range(xs.size - 1):
        h = xs[i + 1] - xs[i]
        d2lo, d2hi = _second_derivative_range(f, float(xs[i]), float(xs[i + 1]))
        cap = (h * h / 8.0) * max(abs(d2lo), abs(d2hi))
        # chord lies above convex (f'' >= 0) stretches and below concave ones
        if d2lo >= 0.0:
            a = min(a, -cap)
        elif d2hi <= 0.0:
            b = max(b, cap)
        else:
            a = min(a, -cap)
            b = max(b, cap)
    return ErrorBound(a, b, method="curvature")


def sampled_error_bound(f: UnaryFuncSpec, n_v: int, samples: int = 100_000) -> ErrorBound:
    """Dense-sampling fallback with a Lipschitz safety margin; flagged."""
    xs = breakpoints(f, n_v)
    ys = f(xs)
    grid = np.linspace(f.lo, f.hi, samples)
    gap = f(grid) - _interp(xs, ys, grid)
    step = (f.hi - f.lo) / (samples - 1)
    fv = f(grid)
    lip = float(np.max(np.abs(np.diff(fv)))) / step if samples > 1 else 0.0
    chord_lip = float(np.max(np.abs(np.diff(ys) / np.diff(xs))))
    margin = 0.5 * step * (lip + chord_lip)
    return ErrorBound(min(float(gap.min()) - margin, 0.0),
                      max(float(gap.max()) + margin, 0.0), method="sampled")


def inflate(graph: HybridZonotope, out_dim: int, e: ErrorBound) -> HybridZonotope:
    """Add the error segment [a, b] to one coordinate (Minkowski sum).

    Appends exactly one continuous generator of half-width (b - a)/2 on
    out_dim and shifts the center by the midpoint.
    """
    if not 0 <= out_dim < graph.n:
        raise ValueError(f"out_dim {out_dim} outside ambient dimension {graph.n}")
    col = np.zeros((graph.n, 1))
    col[out_dim, 0] = 0.5 * (e.b - e.a)
    c = graph.c.copy()
    c[out_dim] += 0.5 * (e.a + e.b)
    return HybridZonotope(
        np.hstack([graph.Gc, col]), graph.Gb, c,
        np.hstack([graph.Ac, np.zeros((graph.nc, 1))]), graph.Ab, graph.b)
