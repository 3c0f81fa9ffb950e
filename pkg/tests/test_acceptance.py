"""The eleven acceptance criteria, at their stated tolerances.

Each test records a one-line verdict that the session summary prints.
"""
import math
import time

import numpy as np

from skewfatou.cli import disk_bound_rows, main
from skewfatou.dynamics import NOT_ESCAPED, certify_subhyperbolic, escape_time, region_from_polynomial
from skewfatou.hyperbolic import BlaschkeMap, verify_diameter_bound
from skewfatou.linearization import (functional_equation_residual, gap_ratios, koenigs,
                                     koenigs_residual, phi_sequence, phi_values)
from skewfatou.poly import eval_poly, parse_poly
from skewfatou.sublevel import GridRaster, area_table, box_dimension, fit_decay, rasterize
from skewfatou.torus import (TorusLattice, TorusPoint, embed, equidistribution_gap, grid_rects,
                             orbit_closure)
from skewfatou.tracker import (avoidance_radius, count_non_escaped, fiber_disk_area_decay,
                               fit_log_slope, j_of_s, postcritical_disks, resonant_grid,
                               schedule_modulus_ok)


def test_01_subhyperbolic_fixtures(record):
    t0 = time.perf_counter()
    ci = certify_subhyperbolic(parse_poly("z^2+i"))
    c2 = certify_subhyperbolic(parse_poly("z^2-2"))
    dt = time.perf_counter() - t0
    (ri,), (r2,) = ci.critical_records, c2.critical_records
    pts = sorted(ri.cycle.points, key=lambda z: z.imag, reverse=True)
    ok = (ri.verdict == "preperiodic_to_repelling" and ri.preperiod == 2
          and abs(pts[0] - (-1 + 1j)) < 1e-9 and abs(pts[1] - (-1j)) < 1e-9
          and abs(ri.cycle.multiplier.real - 4) < 1e-9 and abs(ri.cycle.multiplier.imag - 4) < 1e-9
          and r2.preperiod == 2 and abs(r2.cycle.points[0] - 2) < 1e-9
          and abs(r2.cycle.multiplier - 4) < 1e-9 and dt < 1.0)
    record(1, ok, f"z^2+i r={ri.preperiod} mult={ri.cycle.multiplier:.10g}; z^2-2 r={r2.preperiod} "
                  f"mult={r2.cycle.multiplier:.10g}; {dt:.2f}s")
    assert ok


def test_02_sublevel_area_decay(record):
    t0 = time.perf_counter()
    out = {}
    for s in ("z^2-2", "z+z^2"):
        p = parse_poly(s)
        ras = rasterize(p, region_from_polynomial(p), resolution=2048, cap=60, julia=False)
        tab = area_table(ras, range(0, 61))
        out[s] = (tab, fit_decay(tab, 5, 25))
    dt = time.perf_counter() - t0
    tab, fit = out["z^2-2"]
    areas = [a for _, a, _ in tab]
    monotone = all(b <= a for a, b in zip(areas, areas[1:]))
    _, par = out["z+z^2"]
    ok = fit.rate < 0.95 and fit.r2 > 0.9 and monotone and (par.rate > 0.97 or par.r2 < 0.5) and dt < 120
    record(2, ok, f"z^2-2 rate={fit.rate:.3f} r2={fit.r2:.3f} monotone={monotone}; "
                  f"z+z^2 rate={par.rate:.3f} r2={par.r2:.3f}; {dt:.1f}s")
    assert ok


def test_03_box_dimension(record):
    dims = {}
    for s in ("z^2-2", "z^2"):
        p = parse_poly(s)
        dims[s] = box_dimension(rasterize(p, region_from_polynomial(p), resolution=4096, cap=60))
    full = GridRaster((-1, 1, -1, 1), 4096, np.full((4096, 4096), NOT_ESCAPED, np.uint32))
    dims["square"] = box_dimension(full)
    ok = (0.85 <= dims["z^2-2"] <= 1.15 and 0.85 <= dims["z^2"] <= 1.15 and 1.95 <= dims["square"] <= 2.05)
    record(3, ok, ", ".join(f"{k}: {v:.3f}" for k, v in dims.items()))
    assert ok


def test_04_linearization(record, resonant):
    t0 = time.perf_counter()
    F, br = resonant.F, resonant.branch
    seq = phi_sequence(br, F, range(9, 26))
    ratios = gap_ratios(seq)
    # ratios[i] compares stage 10 + i with stage 9 + i
    mean_ratio = float(np.mean(ratios[:11]))
    r25 = functional_equation_residual(seq[-1], F)
    r15 = functional_equation_residual(seq[15 - 9], F)
    kres = []
    for s in ("z^2-2", "z^2+i"):
        p = parse_poly(s)
        rec = certify_subhyperbolic(p).critical_records[0]
        ch = koenigs(p, rec.cycle)
        th = np.exp(2j * np.pi * np.arange(64) / 64)
        z = ch.fixed_point + 0.5 * ch.radius * np.outer(np.linspace(0, 1, 9), th).ravel()
        kres.append(float(np.max(koenigs_residual(p, ch, z))))
    dt = time.perf_counter() - t0
    ok = mean_ratio < 0.99 and r25 < 1e-6 and r25 < r15 and max(kres) < 1e-8 and dt < 30
    record(4, ok, f"mean gap ratio {mean_ratio:.3f}; residual n=25 {r25:.2e} < n=15 {r15:.2e}; "
                  f"Koenigs {max(kres):.1e}; {dt:.1f}s")
    assert ok


def test_05_schedule_arithmetic(record):
    fixtures = [(4.0, 0.5), (4 + 4j, 0.25), (3.7 * np.exp(0.4j), 0.31 * np.exp(1.1j))]
    bad = 0
    closed = True
    for mu, nu in fixtures:
        for s in range(0, 10001):
            j = j_of_s(mu, nu, s)
            bad += not schedule_modulus_ok(mu, nu, s, j)
            if (mu, nu) == (4.0, 0.5):
                closed &= j == s // 2
    ok = bad == 0 and closed
    record(5, ok, f"violations {bad} over 3 x 10001 values; j(s) = floor(s/2) for |mu|=4,|nu|=1/2: {closed}")
    assert ok


def test_06_escape_schedule(record, resonant):
    t0 = time.perf_counter()
    F, br, region, cert = resonant.F, resonant.branch, resonant.region, resonant.cert
    w0 = resonant.w0
    z, _ = phi_values(br, 30, np.array([w0]))
    et = escape_time(F.p, region, complex(z[0]))
    U = postcritical_disks(cert)
    res = count_non_escaped(F, br, region, w0, U, 2000, cert=cert)
    ratio = [c / math.log(n + 2) for n, c in res.counts]
    # run constant: the largest ratio over the first tenth; later ratios may not exceed it
    C = max(ratio[:200])
    tail = max(ratio[200:])
    whole = count_non_escaped(F, br, region, w0, ((0j, region.R),), 2000, check_U=False)
    zero = all(c == 0 for _, c in whole.counts)
    dt = time.perf_counter() - t0
    ok = et != NOT_ESCAPED and tail <= C and zero and dt < 300
    record(6, ok, f"Phi(w0) escapes at {et}; max #S_n={max(c for _, c in res.counts)}; "
                  f"ratio tail {tail:.3f} <= C {C:.3f}; U=D(0,R) zero={zero}; {dt:.1f}s")
    assert ok


def test_07_resonant_grid(record, resonant):
    F, br, region = resonant.F, resonant.branch, resonant.region
    g = resonant_grid(F, br, resonant.w0, 60, 40, region)
    ident = g.identity_holds()
    x0 = br.x0
    targets = [x0, complex(eval_poly(F.p, x0)), complex(eval_poly(F.p, eval_poly(F.p, x0)))]
    errs = [abs(g.entry(40, j - 40) - targets[j]) for j in range(3)]
    delta = avoidance_radius(g, 1.0, 20, postcritical=resonant.cert.postcritical_points(), R=region.R)
    ok = ident and max(errs) < 1e-8 and delta > 0
    record(7, ok, f"identity exact {ident}; limit error {max(errs):.1e}; delta(y=1) {delta:.3f}")
    assert ok


def test_08_equidistribution(record, resonant):
    br = resonant.branch
    lat = TorusLattice.from_mu(br.mu)
    res = orbit_closure(lat, embed(lat, br.nu))
    lat4 = TorusLattice.from_mu(4)
    real = orbit_closure(lat4, embed(lat4, 0.3))
    y = TorusPoint.from_coords(lat4, (math.sqrt(5) - 1) / 2, math.sqrt(2) - 1)
    rects = grid_rects(4)
    g5 = float(np.mean([equidistribution_gap(lat4, y, [r], 0, 10 ** 5) for r in rects]))
    g3 = float(np.mean([equidistribution_gap(lat4, y, [r], 0, 10 ** 3) for r in rects]))
    ok = (res.kind == "finite" and res.order == 1 and real.kind == "line_family"
          and g5 < 0.01 and g5 < g3)
    record(8, ok, f"resonant {res}; real {real}; dense gap 1e5 {g5:.2e} < 1e3 {g3:.2e}")
    assert ok


def test_09_disk_bounds(record):
    t0 = time.perf_counter()
    rows = disk_bound_rows(500, 6, 42)
    kinds = {k: [r for r in rows if r[1] == k] for k in ("diameter", "critical", "area")}
    counts = {k: (sum(r[-1] for r in v), len(v)) for k, v in kinds.items()}
    m, bd, _ = verify_diameter_bound(BlaschkeMap((0,)), 0.5)
    tight = abs(m - 2 * math.log(3)) < 1e-6 and abs(bd - 2 * math.log(3)) < 1e-12
    dt = time.perf_counter() - t0
    ok = (counts == {"diameter": (100, 100), "critical": (500, 500), "area": (100, 100)}
          and tight and dt < 180)
    record(9, ok, ", ".join(f"{k} {a}/{b}" for k, (a, b) in counts.items())
           + f"; tight case {m:.9f} vs {2 * math.log(3):.9f}; {dt:.1f}s")
    assert ok


def test_10_fiber_disk_decay(record, resonant):
    F, region = resonant.F, resonant.region
    rows = fiber_disk_area_decay(F, region, resonant.w0, (0.3, 0.05), 40, 256)
    slope = fit_log_slope(rows)
    ok = slope < 0 and rows.violations == 0
    record(10, ok, f"{len(rows)} surviving steps, log-area slope {slope:.3f}, containment violations "
                   f"{rows.violations}")
    assert ok


def test_11_determinism(record, tmp_path, monkeypatch):
    monkeypatch.setenv("SKEWFATOU_CACHE_DIR", str(tmp_path / "cache"))
    runs = {
        "areas": ["sublevel-areas", "--grid", "2048", "--cap", "60", "--mmax", "30", "--no-cache"],
        "sn": ["track-critical", "--nmax", "2000", "--w0", "0.05+0.05i"],
        "bounds": ["disk-bounds", "--trials", "500", "--dmax", "6", "--seed", "42"],
    }
    same = {}
    for name, args in runs.items():
        blobs = []
        for k in range(2):
            out = tmp_path / f"{name}{k}.csv"
            assert main(args + ["--out", str(out), "--out-dir", str(tmp_path), "--quiet"]) == 0
            blobs.append(out.read_bytes())
        same[name] = blobs[0] == blobs[1]
    ok = all(same.values())
    record(11, ok, ", ".join(f"{k} identical={v}" for k, v in same.items()))
    assert ok
