import cmath

import numpy as np
import pytest

from skewfatou.dynamics import CycleRecord, certify_subhyperbolic
from skewfatou.errors import PreconditionFail, StableManifoldBranch
from skewfatou.linearization import (branch_data, constant_phi, detect_branch, detect_order_k,
                                     explicit_phi, functional_equation_residual, koenigs,
                                     koenigs_iterative, koenigs_residual, local_order, phi_values,
                                     series_compose, series_mul)
from skewfatou.poly import SkewProduct, parse_poly


def test_series_ops():
    a = np.array([1, 2, 0, 0], complex)
    assert np.allclose(series_mul(a, a, 4), [1, 4, 4, 0])
    # (1 + u)^2 composed with u = 2v  ->  1 + 4v + 4v^2
    outer = np.array([1, 2, 1, 0], complex)
    inner = np.array([0, 2, 0, 0], complex)
    assert np.allclose(series_compose(outer, inner, 4), [1, 4, 4, 0])


def test_linear_map_gives_identity_chart():
    ch = koenigs(parse_poly("2z"), CycleRecord((0j,), 2 + 0j, "repelling"))
    assert ch.series[1] == 1 and np.allclose(ch.series[2:], 0) and ch.mu == 2


def test_koenigs_fixed_point():
    p = parse_poly("z^2-2")
    ch = koenigs(p, CycleRecord((2 + 0j,), 4 + 0j, "repelling"))
    assert abs(ch.series[1] - 1) < 1e-15
    z = 2 + 0.5 * min(ch.radius, 0.1) * np.exp(2j * np.pi * np.arange(100) / 100)
    assert np.max(koenigs_residual(p, ch, z)) < 1e-10
    # the limit construction agrees with the series
    assert np.max(np.abs(koenigs_iterative(p, ch.cycle and CycleRecord(ch.cycle, ch.mu, "repelling"),
                                           z[:5], 30) - ch(z[:5]))) < 1e-8


def test_koenigs_two_cycle():
    p = parse_poly("z^2+i")
    rec = certify_subhyperbolic(p).critical_records[0]
    ch = koenigs(p, rec.cycle)
    assert ch.period == 2 and abs(ch.mu - (4 + 4j)) < 1e-9
    z = ch.fixed_point + 0.4 * ch.radius * np.exp(2j * np.pi * np.arange(100) / 100)
    assert np.max(koenigs_residual(p, ch, z)) < 1e-8


def test_attracting_cycle_rejected():
    with pytest.raises(PreconditionFail):
        koenigs(parse_poly("z^2"), CycleRecord((0j,), 0j, "attracting"))


@pytest.mark.parametrize("text", ["z^2+i+w", "z^2-2+w"])
def test_transverse_branch_is_vertical(text):
    F = SkewProduct.parse(text, "0.25")
    l, coeffs, _ = branch_data(F, 0j)
    assert l == 1 and all(abs(c) < 1e-12 for c in coeffs)


def test_cubic_branch_has_monodromy_two():
    F = SkewProduct.parse("z^3 - 3*w*z", "0.25")
    l, coeffs, _ = branch_data(F, 0j)
    assert l == 2
    # gamma(t) = (t, t^2) up to the choice of square root
    assert abs(abs(coeffs[0]) - 1) < 1e-8 and all(abs(c) < 1e-8 for c in coeffs[1:])


def test_branch_invariants(resonant):
    br = resonant.branch
    assert br.gamma1(np.zeros(1))[0] == br.x0
    assert abs(br.nu ** br.l - resonant.F.lam) < 1e-15
    assert br.k == 1 and abs(br.mu - 4) < 1e-9


def test_phi_at_zero_is_critical_orbit(resonant):
    br = resonant.branch
    for n in (3, 10):
        v, _ = phi_values(br, n, np.zeros(1))
        assert abs(v[0] - 2) < 1e-12


def test_product_map_is_stable_manifold():
    F = SkewProduct.parse("z^2-2", "0.25")
    br = detect_branch(F, certify_subhyperbolic(F.p))
    with pytest.raises(StableManifoldBranch):
        detect_order_k(br, F)


def test_local_order_of_square():
    assert abs(local_order(lambda t: t ** 2, [1e-2, 5e-3, 2.5e-3]) - 2) < 0.05


def test_explicit_fixed_data_residual_zero():
    F = SkewProduct.parse("z^2-2+w", "0.25")
    phi = constant_phi(2.0, np.linspace(-0.1, 0.1, 7), 4.0)
    assert functional_equation_residual(phi, F) == 0.0
    phi = explicit_phi(lambda t: 2 + 0 * t, np.linspace(-0.1, 0.1, 7), 4.0)
    assert functional_equation_residual(phi, F) == 0.0
