import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skewfatou.errors import HypothesisFail, ValidationError
from skewfatou.hyperbolic import (C3, BlaschkeMap, HypDisk, HypSet, critical_points,
                                  diameter_bound, disk_grid, hyp_area, hyp_distance, mobius,
                                  preimage_area, preimage_components, preimage_mask,
                                  verify_area_bound, verify_critical_proximity,
                                  verify_diameter_bound)

in_disk = st.builds(lambda r, t: r * complex(math.cos(t), math.sin(t)),
                    st.floats(0, 0.95), st.floats(0, 2 * math.pi))


def test_distance_examples():
    assert math.isclose(hyp_distance(0, 0.5), math.log(3))
    assert math.isclose(hyp_distance(-0.5, 0.5), math.log(9))
    assert hyp_distance(0.3j, 0.3j) == 0
    with pytest.raises(ValidationError):
        hyp_distance(0, 1.5)


@settings(max_examples=60, deadline=None)
@given(in_disk, in_disk, in_disk, st.floats(0, 2 * math.pi))
def test_mobius_invariance(z1, z2, a, th):
    m = mobius(a, complex(math.cos(th), math.sin(th)))
    d0 = hyp_distance(z1, z2)
    assert abs(hyp_distance(m(z1), m(z2)) - d0) < 1e-6 * (1 + d0)


@settings(max_examples=40, deadline=None)
@given(st.lists(in_disk, min_size=1, max_size=4), in_disk, in_disk)
def test_schwarz_pick(zeros, z1, z2):
    b = BlaschkeMap(tuple(zeros))
    assert hyp_distance(b(z1), b(z2)) <= hyp_distance(z1, z2) + 1e-7


def test_disk_area():
    assert math.isclose(HypDisk(0j, 2.0).area, 4 * math.pi * math.sinh(1) ** 2)
    assert math.isclose(HypDisk(0j, 2.0).area, 17.37, rel_tol=1e-3)
    assert hyp_area(HypSet(np.zeros((8, 8), bool))) == 0.0


def test_mask_area_matches_closed_form():
    z = disk_grid(1024)
    mask = HypSet(np.abs(z) < 0.5)
    exact = HypDisk.from_euclidean_origin(0.5).area
    assert abs(hyp_area(mask) - exact) < 0.01 * exact


def test_constant():
    assert math.isclose(C3, 1 + 2 ** 12 * math.pi) and math.floor(C3) == 12868


def test_critical_points_examples():
    assert np.allclose(critical_points(BlaschkeMap((0, 0))), [0])
    a = 0.3
    (c,) = critical_points(BlaschkeMap((0, a)))
    assert abs(c.imag) < 1e-12 and 0 < c.real < a
    assert abs(BlaschkeMap((0, a)).derivative(c)) < 1e-12


def test_random_degree_four(rng):
    for _ in range(20):
        b = BlaschkeMap.random(rng, 4)
        cs = critical_points(b)
        assert len(cs) == 3 and max(abs(b.derivative(c)) for c in cs) < 1e-10


@settings(max_examples=20, deadline=None)
@given(st.lists(in_disk, min_size=1, max_size=5), in_disk)
def test_preimage_count(zeros, w):
    b = BlaschkeMap(tuple(zeros))
    pre = b.preimages(w)
    assert len(pre) == b.degree
    assert np.allclose(b(np.asarray(pre)), w, atol=1e-9)


def test_components():
    target = HypDisk.from_euclidean_origin(0.3)
    (comp,) = preimage_components(BlaschkeMap((0,)), target, 256)
    assert np.array_equal(comp.mask, preimage_mask(BlaschkeMap((0,)), target, 256).mask)
    assert len(preimage_components(BlaschkeMap((0, 0)), HypDisk.from_euclidean_origin(0.25), 256)) == 1
    small = HypDisk.from_euclidean_origin(0.05)
    assert len(preimage_components(BlaschkeMap((0, 0.9)), small, 512)) == 2


def test_diameter_examples():
    m, bd, ok = verify_diameter_bound(BlaschkeMap((0, 0)), 0.25)
    assert ok and math.isclose(bd, 4 * math.log(3)) and abs(m - 2 * math.log(3)) < 1e-6
    assert math.isclose(diameter_bound(1, 0.5), 2 * math.log(3))


def test_proximity_examples():
    nearest, bound, ok = verify_critical_proximity(BlaschkeMap((0, 0)), 0.2)
    assert nearest == 0 and ok
    nearest, bound, ok = verify_critical_proximity(BlaschkeMap((0, 0.1)), 0.1)
    assert ok and bound == pytest.approx(6.4)


def test_area_examples():
    tiny = HypDisk.with_area(0.2, 1e-6)
    area, bound, ok = verify_area_bound(BlaschkeMap((0,)), tiny)
    assert ok and abs(area - 1e-6) < 0.05e-6
    with pytest.raises(HypothesisFail):
        verify_area_bound(BlaschkeMap((0, 0.5, -0.5)), HypDisk.with_area(0, 1e-6))
    assert preimage_area(BlaschkeMap((0,)), HypDisk.with_area(0, 1e-4)) == pytest.approx(1e-4, rel=0.05)
