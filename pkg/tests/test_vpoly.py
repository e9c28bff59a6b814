"""Vertex-representation polytope unions and their set conversion."""

import numpy as np
import pytest

from conftest import assert_member, assert_non_member
from hyzo.sets import SchemaError
from hyzo.vpoly import VPolyCollection, edges_incidence, to_hybrid_zonotope


def triangle_and_square():
    # triangle (0,0)(2,0)(0,2); unit square shifted to [3,4]^2
    v = np.array([
        [0.0, 2.0, 0.0, 3.0, 4.0, 4.0, 3.0],
        [0.0, 0.0, 2.0, 3.0, 3.0, 4.0, 4.0],
    ])
    m = np.zeros((7, 2))
    m[:3, 0] = 1.0
    m[3:, 1] = 1.0
    return VPolyCollection(v, m)


def test_collection_validation():
    with pytest.raises(ValueError):
        VPolyCollection(np.zeros((2, 3)), np.zeros((2, 1)))   # row mismatch
    with pytest.raises(ValueError):
        VPolyCollection(np.zeros((2, 3)), 0.5 * np.ones((3, 1)))
    with pytest.raises(ValueError):
        VPolyCollection(np.zeros((2, 3)), np.zeros((3, 1)))   # empty polytope
    with pytest.raises(SchemaError):
        VPolyCollection.from_dict({"v": [[0.0]]})


def test_edges_incidence_shape():
    m = edges_incidence(4)
    assert m.shape == (4, 3)
    want = np.array([[1, 0, 0], [1, 1, 0], [0, 1, 1], [0, 0, 1]], dtype=float)
    assert np.array_equal(m, want)
    with pytest.raises(ValueError):
        edges_incidence(1)


def test_conversion_counts():
    s = triangle_and_square()
    z = to_hybrid_zonotope(s)
    assert z.counts.as_tuple() == (2 * s.n_vertices, s.n_polytopes,
                                   s.n_vertices + 2)


def test_union_membership(rng):
    s = triangle_and_square()
    z = to_hybrid_zonotope(s)
    # vertices and random convex combinations are inside
    for j in range(s.n_vertices):
        assert_member(z, s.v[:, j])
    tri = s.v[:, :3]
    sq = s.v[:, 3:]
    for _ in range(10):
        w = rng.dirichlet(np.ones(3))
        assert_member(z, tri @ w)
        w = rng.dirichlet(np.ones(4))
        assert_member(z, sq @ w)
    # points between the two pieces or past them are outside
    for p in ([2.0, 2.0], [2.5, 2.5], [-0.5, 0.0], [4.5, 3.5], [1.5, 1.0]):
        assert_non_member(z, p)


def test_segment_union_graph(rng):
    # path through three points; the set is the two connecting segments
    xs = np.array([0.0, 1.0, 2.0])
    ys = np.array([0.0, 1.0, 0.0])
    z = to_hybrid_zonotope(VPolyCollection(np.vstack([xs, ys]),
                                           edges_incidence(3)))
    for t in rng.uniform(0.0, 1.0, size=8):
        assert_member(z, [t, t])               # first segment
        assert_member(z, [1.0 + t, 1.0 - t])   # second segment
    assert_non_member(z, [0.5, 0.9])
    assert_non_member(z, [1.5, 0.1])


def test_json_round_trip():
    s = triangle_and_square()
    back = VPolyCollection.from_json(s.to_json())
    assert np.array_equal(back.v, s.v)
    assert np.array_equal(back.m, s.m)
