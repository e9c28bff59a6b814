"""Hybrid zonotope set representation and closed-form set operations.

A hybrid zonotope is parameterized by continuous generators Gc, binary
generators Gb, a center c, and linear constraints Ac, Ab, b over the
factor variables:

    Z = { Gc @ xc + Gb @ xb + c :  xc in [-1,1]^ng,  xb in {-1,1}^nb,
                                   Ac @ xc + Ab @ xb = b }

Each of the 2^nb binary choices leaves a constrained zonotope, so the
representation encodes a union of up to 2^nb convex pieces with memory
that stays polynomial in (ng, nb, nc).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


class DimensionError(ValueError):
    """Operand dimensions are incompatible."""


class SchemaError(ValueError):
    """A serialized object violates the documented schema."""


@dataclass(frozen=True)
class ComplexityCount:
    """Memory complexity triple of a hybrid zonotope."""

    ng: int
    nb: int
    nc: int

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.ng, self.nb, self.nc)

    def __add__(self, other: "ComplexityCount") -> "ComplexityCount":
        return ComplexityCount(self.ng + other.ng, self.nb + other.nb, self.nc + other.nc)


@dataclass(frozen=True)
class IntervalBox:
    """Axis-aligned box given by per-dimension lower/upper bounds."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DimensionError("box bounds must be 1-D arrays of equal length")
        if np.any(hi < lo):
            raise ValueError("box upper bounds must dominate lower bounds")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def half_width(self) -> np.ndarray:
        return 0.5 * (self.hi - self.lo)

    def contains(self, other: "IntervalBox", tol: float = 0.0) -> bool:
        return bool(np.all(other.lo >= self.lo - tol) and np.all(other.hi <= self.hi + tol))

    def contains_point(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def intersect(self, other: "IntervalBox") -> "IntervalBox":
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        if np.any(hi < lo):
            raise ValueError("boxes do not intersect")
        return IntervalBox(lo, hi)

    def stack(self, other: "IntervalBox") -> "IntervalBox":
        return IntervalBox(np.concatenate([self.lo, other.lo]), np.concatenate([self.hi, other.hi]))

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=(count, self.dim))


def _as_matrix(a, rows: int, name: str) -> np.ndarray:
    m = np.asarray(a, dtype=float)
    if m.ndim != 2 and m.size == 0:
        m = m.reshape(rows, 0)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be a 2-D array")
    if m.shape[0] != rows:
        raise DimensionError(f"{name} has {m.shape[0]} rows, expected {rows}")
    return np.ascontiguousarray(m)


@dataclass(frozen=True)
class HybridZonotope:
    """Immutable hybrid zonotope in generator-constraint form."""

    Gc: np.ndarray
    Gb: np.ndarray
    c: np.ndarray
    Ac: np.ndarray
    Ab: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        if c.ndim != 1:
            raise DimensionError("center must be a 1-D array")
        n = c.size
        Gc = _as_matrix(self.Gc, n, "Gc")
        Gb = _as_matrix(self.Gb, n, "Gb")
        bv = np.atleast_1d(np.asarray(self.b, dtype=float))
        if bv.ndim != 1:
            raise DimensionError("constraint offset must be a 1-D array")
        nc = bv.size
        Ac = _as_matrix(self.Ac, nc, "Ac")
        Ab = _as_matrix(self.Ab, nc, "Ab")
        if Ac.shape[1] != Gc.shape[1]:
            raise DimensionError("Ac column count must match Gc")
        if Ab.shape[1] != Gb.shape[1]:
            raise DimensionError("Ab column count must match Gb")
        for nm, arr in (("Gc", Gc), ("Gb", Gb), ("c", c), ("Ac", Ac), ("Ab", Ab), ("b", bv)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{nm} contains non-finite entries")
            object.__setattr__(self, nm, arr)

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def ng(self) -> int:
        return self.Gc.shape[1]

    @property
    def nb(self) -> int:
        return self.Gb.shape[1]

    @property
    def nc(self) -> int:
        return self.b.size

    @property
    def counts(self) -> ComplexityCount:
        return ComplexityCount(self.ng, self.nb, self.nc)

    # -- constructors ----------------------------------------------------

    @staticmethod
    def from_box(box: IntervalBox) -> "HybridZonotope":
        """Axis-aligned box as an unconstrained zonotope, one generator per dim."""
        n = box.dim
        return HybridZonotope(
            np.diag(box.half_width), np.zeros((n, 0)), box.center,
            np.zeros((0, n)), np.zeros((0, 0)), np.zeros(0))

    @staticmethod
    def from_point(p) -> "HybridZonotope":
        p = np.atleast_1d(np.asarray(p, dtype=float))
        n = p.size
        return HybridZonotope(
            np.zeros((n, 0)), np.zeros((n, 0)), p,
            np.zeros((0, 0)), np.zeros((0, 0)), np.zeros(0))

    @staticmethod
    def from_interval(lo: float, hi: float) -> "HybridZonotope":
        """Scalar interval [lo, hi] as a one-generator zonotope."""
        return HybridZonotope.from_box(IntervalBox([lo], [hi]))

    # -- point evaluation ------------------------------------------------

    def point_of(self, xc, xb) -> np.ndarray:
        """Map factor values to the ambient point (ignores feasibility)."""
        xc = np.asarray(xc, dtype=float).reshape(self.ng)
        xb = np.asarray(xb, dtype=float).reshape(self.nb)
        return self.Gc @ xc + self.Gb @ xb + self.c

    def constraint_residual(self, xc, xb) -> float:
        """Max-norm violation of the factor constraints at (xc, xb)."""
        xc = np.asarray(xc, dtype=float).reshape(self.ng)
        xb = np.asarray(xb, dtype=float).reshape(self.nb)
        if self.nc == 0:
            return 0.0
        return float(np.max(np.abs(self.Ac @ xc + self.Ab @ xb - self.b)))

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "gc": self.Gc.tolist(), "gb": self.Gb.tolist(), "c": self.c.tolist(),
            "ac": self.Ac.tolist(), "ab": self.Ab.tolist(), "b": self.b.tolist(),
            "n": self.n, "ng": self.ng, "nb": self.nb, "nc": self.nc,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @staticmethod
    def from_dict(d: dict) -> "HybridZonotope":
        for key in ("gc", "gb", "c", "ac", "ab", "b", "n", "ng", "nb", "nc"):
            if key not in d:
                raise SchemaError(f"hybrid zonotope JSON missing key '{key}'")
        c = np.asarray(d["c"], dtype=float)
        n = c.size

        def load(key, rows, cols):
            raw = d[key]
            m = np.asarray(raw, dtype=float)
            if m.size == 0:
                m = np.zeros((rows, cols))
            if m.shape != (rows, cols):
                raise SchemaError(f"'{key}' has shape {m.shape}, expected {(rows, cols)}")
            return m

        ng, nb, nc = int(d["ng"]), int(d["nb"]), int(d["nc"])
        if int(d["n"]) != n:
            raise SchemaError("declared dimension disagrees with center length")
        z = HybridZonotope(
            load("gc", n, ng), load("gb", n, nb), c,
            load("ac", nc, ng), load("ab", nc, nb),
            np.asarray(d["b"], dtype=float).reshape(nc))
        return z

    @staticmethod
    def from_json(text: str) -> "HybridZonotope":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise SchemaError(f"invalid JSON: {e}") from e
        if not isinstance(d, dict):
            raise SchemaError("hybrid zonotope JSON must be an object")
        return HybridZonotope.from_dict(d)


# -- closed-form operations ----------------------------------------------


def linear_map(R, z: HybridZonotope) -> HybridZonotope:
    """Image R @ Z. Generators and center are mapped, constraints carry over."""
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if R.shape[1] != z.n:
        raise DimensionError(f"map has {R.shape[1]} columns, set has dimension {z.n}")
    return HybridZonotope(R @ z.Gc, R @ z.Gb, R @ z.c, z.Ac, z.Ab, z.b)


def translate(z: HybridZonotope, offset) -> HybridZonotope:
    offset = np.asarray(offset, dtype=float).reshape(z.n)
    return HybridZonotope(z.Gc, z.Gb, z.c + offset, z.Ac, z.Ab, z.b)


def minkowski_sum(z: HybridZonotope, w: HybridZonotope) -> HybridZonotope:
    """Z + W by generator concatenation; factor sets stay independent."""
    if z.n != w.n:
        raise DimensionError("summands must share ambient dimension")
    Gc = np.hstack([z.Gc, w.Gc])
    Gb = np.hstack([z.Gb, w.Gb])
    Ac = _block_diag(z.Ac, w.Ac)
    Ab = _block_diag(z.Ab, w.Ab)
    return HybridZonotope(Gc, Gb, z.c + w.c, Ac, Ab, np.concatenate([z.b, w.b]))


def generalized_intersection(z: HybridZonotope, y: HybridZonotope, R) -> HybridZonotope:
    """{ v in Z : R @ v in Y }, expressed in Z's ambient space.

    The result keeps Z's generators, pads with Y's (zero columns in the
    ambient map), and appends m coupling rows equating R applied to Z's
    parameterization with Y's parameterization.
    """
    R = np.atleast_2d(np.asarray(R, dtype=float))
    m, n = R.shape
    if n != z.n:
        raise DimensionError("R column count must match Z dimension")
    if m != y.n:
        raise DimensionError("R row count must match Y dimension")
    Gc = np.hstack([z.Gc, np.zeros((z.n, y.ng))])
    Gb = np.hstack([z.Gb, np.zeros((z.n, y.nb))])
    Ac = np.vstack([
        _block_diag(z.Ac, y.Ac),
        np.hstack([R @ z.Gc, -y.Gc]),
    ])
    Ab = np.vstack([
        _block_diag(z.Ab, y.Ab),
        np.hstack([R @ z.Gb, -y.Gb]),
    ])
    b = np.concatenate([z.b, y.b, y.c - R @ z.c])
    return HybridZonotope(Gc, Gb, z.c, Ac, Ab, b)


def intersection(z: HybridZonotope, y: HybridZonotope) -> HybridZonotope:
    """Plain intersection: generalized intersection under the identity map."""
    return generalized_intersection(z, y, np.eye(z.n))


def cartesian_product(z: HybridZonotope, y: HybridZonotope) -> HybridZonotope:
    Gc = _block_diag(z.Gc, y.Gc)
    Gb = _block_diag(z.Gb, y.Gb)
    Ac = _block_diag(z.Ac, y.Ac)
    Ab = _block_diag(z.Ab, y.Ab)
    return HybridZonotope(
        Gc, Gb, np.concatenate([z.c, y.c]),
        Ac, Ab, np.concatenate([z.b, y.b]))


@dataclass(frozen=True)
class CleanupResult:
    set: HybridZonotope
    # True when an all-zero constraint row demands a nonzero offset, which
    # proves the set empty; the caller decides how to react.
    empty: bool
    removed: ComplexityCount = field(default=ComplexityCount(0, 0, 0))


def cleanup(z: HybridZonotope, tol: float = 0.0) -> CleanupResult:
    """Exact redundancy removal.

    Drops continuous generators whose Gc and Ac columns are both all zero,
    constraint rows that are all zero with zero offset, and exact duplicate
    constraint rows. Entries are compared exactly unless tol > 0.
    """

    def zero(a):
        return np.abs(a) <= tol if tol > 0 else a == 0.0

    keep_g = ~(np.all(zero(z.Gc), axis=0) & np.all(zero(z.Ac), axis=0))
    Gc = z.Gc[:, keep_g]
    Ac = z.Ac[:, keep_g]

    rows = np.hstack([Ac, z.Ab, z.b[:, None]])
    empty = False
    keep_r = []
    seen = set()
    for i in range(rows.shape[0]):
        row = rows[i]
        if np.all(zero(row[:-1])):
            if zero(np.array([row[-1]]))[0]:
                continue  # vacuous row
            empty = True  # 0 = b with b != 0: infeasible
            continue
        key = row.tobytes()
        if key in seen:
            continue
        seen.add(key)
        keep_r.append(i)

    keep_r = np.array(keep_r, dtype=int)
    out = HybridZonotope(Gc, z.Gb, z.c, Ac[keep_r], z.Ab[keep_r], z.b[keep_r])
    removed = ComplexityCount(z.ng - out.ng, 0, z.nc - out.nc)
    return CleanupResult(out, empty, removed)


def _block_diag(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ra, ca = a.shape
    rb, cb = b.shape
    out = np.zeros((ra + rb, ca + cb))
    out[:ra, :ca] = a
    out[ra:, ca:] = b
    return out
