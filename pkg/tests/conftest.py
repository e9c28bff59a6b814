"""Shared helpers for the test suite."""

import numpy as np
import pytest

from hyzo.sets import HybridZonotope, IntervalBox
from hyzo.query import contains_point, support, Tolerances


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def box_zonotope_support(z: HybridZonotope, d: np.ndarray) -> float:
    """Closed-form support of an unconstrained hybrid zonotope.

    With no constraints the factors range freely over [-1, 1], so the
    support value is d'c plus the absolute row sums; binary factors
    reach +/-1 as well, giving the same formula.
    """
    assert z.nc == 0
    g = np.concatenate([d @ z.Gc, d @ z.Gb])
    return float(d @ z.c + np.sum(np.abs(g)))


def assert_member(z, point, **kw):
    res = contains_point(z, point, **kw)
    assert res.status == "member", f"{point} should be inside"
    xc, xb = res.certificate
    assert np.max(np.abs(z.point_of(xc, xb) - point)) <= 1e-6


def assert_non_member(z, point, **kw):
    res = contains_point(z, point, **kw)
    assert res.status == "non_member", f"{point} should be outside"


def random_interval_box(rng, n, span=3.0) -> IntervalBox:
    lo = rng.uniform(-span, span, size=n)
    return IntervalBox(lo, lo + rng.uniform(0.1, span, size=n))
