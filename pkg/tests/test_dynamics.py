import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skewfatou.dynamics import (NOT_ESCAPED, EscapeRegion, basin_disks, build_escape_region,
                                certify_subhyperbolic, classify_multiplier, escape_radius,
                                escape_time, escape_time_array, find_cycles, containment_violations,
                                region_from_polynomial)
from skewfatou.errors import Undecided
from skewfatou.poly import SkewProduct, eval_poly, parse_poly


@pytest.mark.parametrize("text, exact", [
    ("z^2+i", 1 + math.sqrt(2)),
    ("z^2-2", 1 + math.sqrt(3)),
    ("z^2", 2.0),
])
def test_escape_radius_close_to_analytic(text, exact):
    R = escape_radius(parse_poly(text))
    assert exact <= R <= 1.02 * exact


def test_escape_radius_property():
    p = parse_poly("z^3 - 1.5z + 0.3i")
    R = escape_radius(p)
    z = R * np.exp(2j * np.pi * np.arange(2000) / 2000)
    assert np.all(np.abs(eval_poly(p, z)) > 2 * R)


def _find(cycles, pts):
    for c in cycles:
        if len(c.points) == len(pts) and all(min(abs(x - y) for x in c.points) < 1e-9 for y in pts):
            return c
    return None


def test_find_cycles_examples():
    c = _find(find_cycles(parse_poly("z^2-2")), [2])
    assert c is not None and abs(c.multiplier - 4) < 1e-9 and c.classification == "repelling"
    c = _find(find_cycles(parse_poly("z^2+i")), [-1 + 1j, -1j])
    assert c is not None and abs(c.multiplier - (4 + 4j)) < 1e-9
    assert abs(abs(c.multiplier) - 4 * math.sqrt(2)) < 1e-9
    c = _find(find_cycles(parse_poly("z^2")), [0])
    assert c is not None and abs(c.multiplier) < 1e-12 and c.classification == "attracting"


@settings(max_examples=15, deadline=None)
@given(st.floats(-1.9, 0.2), st.floats(-1, 1))
def test_cycles_are_cycles(a, b):
    p = parse_poly(f"z^2 + ({a!r}) + ({b!r})i")
    for cyc in find_cycles(p, 3):
        pts = cyc.points
        for k, z in enumerate(pts):
            assert abs(eval_poly(p, z) - pts[(k + 1) % len(pts)]) < 1e-7 * (1 + abs(z))
        mult = np.prod([2 * z for z in pts])
        assert abs(mult - cyc.multiplier) < 1e-6 * (1 + abs(mult))
        assert cyc.classification == classify_multiplier(cyc.multiplier)


def test_certificate_examples():
    (r,) = certify_subhyperbolic(parse_poly("z^2+i")).critical_records
    assert r.verdict == "preperiodic_to_repelling" and r.preperiod == 2
    assert {round(z.real, 9) + 1j * round(z.imag, 9) for z in r.cycle.points} == {-1 + 1j, -1j}
    (r,) = certify_subhyperbolic(parse_poly("z^2-2")).critical_records
    assert r.preperiod == 2 and abs(r.cycle.points[0] - 2) < 1e-9
    (r,) = certify_subhyperbolic(parse_poly("z^2-1")).critical_records
    assert r.verdict == "fatou_escapes"
    assert set(r.as_dict()) == {"critical_point", "verdict", "preperiod", "cycle", "multiplier"}


def test_parabolic_is_undecided():
    with pytest.raises(Undecided):
        certify_subhyperbolic(parse_poly("z^2+0.25"))


def test_basin_disks_map_inside():
    p = parse_poly("z^2-1")
    R = escape_radius(p)
    disks = basin_disks(p, find_cycles(p), R)
    assert len(disks) == 2
    th = np.exp(2j * np.pi * np.arange(512) / 512)
    region = EscapeRegion(R, tuple(disks))
    for c, r in disks:
        img = eval_poly(p, c + r * th)
        assert np.all(region.depth_W0(img) > 0)


@pytest.mark.parametrize("text, basins", [("z^2-2", 0), ("z^2+i", 0), ("z^2-1", 2)])
def test_build_escape_region(text, basins):
    F = SkewProduct.parse(text + "+w", "0.25")
    cert = certify_subhyperbolic(F.p)
    reg = build_escape_region(F.p, cert, F)
    assert len(reg.basin_disks) == basins and reg.eps > 0 and reg.C1 > 0 and reg.M > 1
    bad, tried = containment_violations(F, reg, np.random.default_rng(3), n_points=300)
    assert bad == 0 and tried > 0


def test_escape_time_examples():
    p = parse_poly("z^2-2")
    reg = region_from_polynomial(p)
    assert escape_time(p, reg, 10) == 0
    assert escape_time(p, reg, 0, cap=500) == NOT_ESCAPED
    assert escape_time(p, reg, 3) == 0  # R is about 2.73, so 3 is already outside
    assert escape_time(p, reg, 2.5) == 1
    # monotonicity along the orbit
    assert escape_time(p, reg, 2.1) - 1 == escape_time(p, reg, 2.1 ** 2 - 2)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.builds(complex, st.floats(-3, 3), st.floats(-3, 3)), min_size=1, max_size=20))
def test_escape_time_array_matches_scalar(zs):
    p = parse_poly("z^2+i")
    reg = region_from_polynomial(p)
    arr = escape_time_array(p, reg, np.array(zs), 40)
    assert [int(v) for v in arr] == [escape_time(p, reg, z, 40) for z in zs]
