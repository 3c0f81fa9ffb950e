import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skewfatou.errors import ClosureMismatch, ValidationError, ZeroInput
from skewfatou.torus import (TorusLattice, TorusPoint, closure_measure, embed,
                             equidistribution_gap, fill_check, grid_rects, julia_pullback_mask,
                             orbit_closure, rect_union_area)

LAT = TorusLattice.from_mu(4 + 1j)


def test_trivial_embeddings():
    assert embed(LAT, 1).rep == 0
    assert embed(LAT, 4 + 1j).rep == 0
    with pytest.raises(ZeroInput):
        embed(LAT, 0)
    with pytest.raises(ValidationError):
        TorusLattice(1j)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, 10), st.floats(-math.pi, math.pi))
def test_mu_translation_invariance(r, th):
    z = r * complex(math.cos(th), math.sin(th))
    assert embed(LAT, z) == embed(LAT, (4 + 1j) * z)
    assert embed(LAT, z).distance(embed(LAT, -(-z))) == 0


def test_coords_roundtrip():
    X, Y = LAT.coords(LAT.point(0.3, 0.7))
    assert abs(X - 0.3) < 1e-12 and abs(Y - 0.7) < 1e-12


def test_resonant_closure_is_finite():
    lat = TorusLattice.from_mu(4)
    cl = orbit_closure(lat, embed(lat, 0.25))
    assert cl.kind == "finite" and cl.order == 1 and str(cl) == "finite(1)"


def test_rational_closure_order():
    lat = TorusLattice.from_mu(4)
    cl = orbit_closure(lat, TorusPoint.from_coords(lat, 2 / 7, 3 / 7))
    assert cl.kind == "finite" and cl.order == 7


def test_real_nu_gives_line_family():
    lat = TorusLattice.from_mu(4)
    cl = orbit_closure(lat, embed(lat, 0.3))
    assert cl.kind == "line_family" and cl.count == 1


def test_independent_coords_dense():
    lat = TorusLattice.from_mu(4)
    y = TorusPoint.from_coords(lat, math.sqrt(2) - 1, math.sqrt(3) - 1)
    assert orbit_closure(lat, y).kind == "dense"
    assert fill_check(y, 200000, 64) == 1.0


def test_finite_closure_gap_zero():
    lat = TorusLattice.from_mu(4)
    y = TorusPoint.from_coords(lat, 0.5, 0.0)
    # O holds both orbit points 0 and (1/2, 0)
    O = [(0.45, 0.55, 0.0, 0.1), (0.95, 1.0, 0.0, 0.1), (0.0, 0.05, 0.0, 0.1)]
    assert equidistribution_gap(lat, y, O, 0, 100) == 0.0


def test_dense_gap():
    lat = TorusLattice.from_mu(4)
    y = TorusPoint.from_coords(lat, (math.sqrt(5) - 1) / 2, math.sqrt(2) - 1)
    assert equidistribution_gap(lat, y, [(0, 0.5, 0, 0.5)], 0, 10 ** 5) < 0.01


def test_gap_needs_overlap():
    lat = TorusLattice.from_mu(4)
    with pytest.raises(ClosureMismatch):
        equidistribution_gap(lat, embed(lat, 0.25), [(0.4, 0.6, 0.4, 0.6)], 0, 10)


def test_rect_measures():
    assert math.isclose(rect_union_area(grid_rects(4)), 1.0)
    assert math.isclose(rect_union_area([(0, 0.5, 0, 0.5), (0.25, 0.75, 0, 0.5)]), 0.375)
    lat = TorusLattice.from_mu(4)
    cl = orbit_closure(lat, TorusPoint.from_coords(lat, math.sqrt(2) - 1, math.sqrt(3) - 1))
    assert math.isclose(closure_measure(cl, [(0, 0.5, 0, 0.5)]), 0.25)


def test_pullback_mask_small(resonant):
    m = julia_pullback_mask(resonant.branch, resonant.region, 12, res=32)
    assert m.mask.shape == (32, 32) and m.fraction < 0.5
    level = m.escape_level([(0, 1, 0, 1)])
    assert (level is None) == bool(m.mask.any())
