"""Unions of V-rep polytopes as hybrid zonotopes.

A collection is a vertex matrix V (one column per vertex) plus a 0/1
incidence matrix M whose column i selects the vertices of polytope P_i;
the represented set is the union of the convex hulls of the selected
vertex groups. The conversion emits a hybrid zonotope with exactly
(2 n_v, N, n_v + 2) generators/binaries/constraints:

  - n_v convex-combination weights lambda in [0,1], rescaled to [-1,1];
  - n_v slacks turning lambda_j <= (M delta)_j into equalities;
  - N binaries delta (one-hot via their sum constraint) choosing the
    active polytope.

The weight simplex constraint and the one-hot constraint each use one
row; the slack rows contribute n_v more.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .sets import HybridZonotope, SchemaError


@dataclass(frozen=True)
class VPolyCollection:
    """Vertex matrix (n x n_v) and incidence matrix (n_v x N)."""

    v: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.v, dtype=float))
        m = np.atleast_2d(np.asarray(self.m, dtype=float))
        if v.ndim != 2 or m.ndim != 2:
            raise ValueError("vertex and incidence matrices must be 2-D")
        if v.shape[1] < 1 or m.shape[1] < 1:
            raise ValueError("need at least one vertex and one polytope")
        if m.shape[0] != v.shape[1]:
            raise ValueError(
                f"incidence has {m.shape[0]} rows, expected one per vertex ({v.shape[1]})")
        if not np.all((m == 0.0) | (m == 1.0)):
            raise ValueError("incidence entries must be 0 or 1")
        if np.any(m.sum(axis=0) < 1):
            raise ValueError("every polytope must select at least one vertex")
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(m))):
            raise ValueError("matrices must be finite")
        object.__setattr__(self, "v", np.ascontiguousarray(v))
        object.__setattr__(self, "m", np.ascontiguousarray(m))

    @property
    def dim(self) -> int:
        return self.v.shape[0]

    @property
    def n_vertices(self) -> int:
        return self.v.shape[1]

    @property
    def n_polytopes(self) -> int:
        return self.m.shape[1]

    def to_dict(self) -> dict:
        return {"v": self.v.tolist(), "m": self.m.astype(int).tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @staticmethod
    def from_dict(d: dict) -> "VPolyCollection":
        if "v" not in d or "m" not in d:
            raise SchemaError("polytope collection JSON needs keys 'v' and 'm'")
        try:
            return VPolyCollection(np.asarray(d["v"], dtype=float),
                                   np.asarray(d["m"], dtype=float))
        except ValueError as e:
            raise SchemaError(str(e)) from e

    @staticmethod
    def from_json(text: str) -> "VPolyCollection":
        return VPolyCollection.from_dict(json.loads(text))


def edges_incidence(n_v: int) -> np.ndarray:
    """Incidence selecting consecutive vertex pairs: segments of a 1-D path."""
    if n_v < 2:
        raise ValueError("a path needs at least 2 vertices")
    m = np.zeros((n_v, n_v - 1))
    idx = np.arange(n_v - 1)
    m[idx, idx] = 1.0
    m[idx + 1, idx] = 1.0
    return m


def to_hybrid_zonotope(s: VPolyCollection) -> HybridZonotope:
    """Exact hybrid zonotope for the union; counts are (2 n_v, N, n_v + 2).

    Factors are, in order: n_v rescaled weights, n_v rescaled slacks,
    then N polytope selectors. With w = (x+1)/2 mapping [-1,1] to [0,1],
    the constraints encode sum(lambda) = 1, sum(delta) = 1, and
    lambda_j + s_j = (M delta)_j.
    """
    V, M = s.v, s.m
    n, nv = V.shape
    N = M.shape[1]
    ones_v = np.ones(nv)

    Gc = np.hstack([0.5 * V, np.zeros((n, nv))])
    Gb = np.zeros((n, N))
    c = 0.5 * V @ ones_v

    Ac = np.vstack([
        np.concatenate([ones_v, np.zeros(nv)])[None, :],
        np.zeros((1, 2 * nv)),
        np.hstack([np.eye(nv), np.eye(nv)]),
    ])
    Ab = np.vstack([
        np.zeros((1, N)),
        np.ones((1, N)),
        -M,
    ])
    b = np.concatenate([[2.0 - nv, 2.0 - N], M @ np.ones(N) - 2.0])
    return HybridZonotope(Gc, Gb, c, Ac, Ab, b)
