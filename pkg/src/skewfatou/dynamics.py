"""One-dimensional dynamics of the base polynomial ``p = f(., 0)``.

Escape radius, periodic cycles, subhyperbolicity certificates, the escape
region ``W0`` (and its fattening ``W = W0 x D(0, eps)``), and the escape-time
oracle behind the sublevel sets ``U_m`` / ``V_m``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NoAttractingMargin, NonConvergence, Undecided, ValidationError
from .poly import (ComplexPoly, aberth, cluster_roots, derivative, eval_family,
                   eval_family_dw, eval_family_dz, eval_poly, roots)

NOT_ESCAPED = 0xFFFFFFFF

CIRCLE_SAMPLES = 4096
SHADOW_PERIODS = 3
DEFAULT_BUDGET = 200
DEFAULT_CAP = 100
CERT_TOL = 1e-9


def _circle(n=CIRCLE_SAMPLES):
    return np.exp(2j * np.pi * (np.arange(n) + 0.5) / n)


def escape_radius(p, samples=CIRCLE_SAMPLES, grid=512, inflate=1.01):
    """Smallest R (up to bisection and a 1% inflation) with ``|p(z)| > 2|z|``
    on every sampled circle ``|z| = R' >= R``."""
    if p.degree < 2 or p.leading != 1:
        raise ValidationError("escape_radius needs a monic polynomial of degree >= 2")
    circ = _circle(samples)
    # beyond this the implication holds for a monic polynomial
    upper = 2.0 + sum(abs(c) for c in p.coeffs[:-1])

    def fails(r):
        z = r * circ
        return bool(np.any(np.abs(eval_poly(p, z)) <= 2 * r))

    radii = np.linspace(0.0, upper, grid + 1)
    bad = [i for i, r in enumerate(radii) if fails(r)]
    if not bad:
        return 0.0
    lo = radii[bad[-1]]
    hi = radii[min(bad[-1] + 1, grid)]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if fails(mid):
            lo = mid
        else:
            hi = mid
    return hi * inflate


# ---------------------------------------------------------------------------
# cycles


@dataclass(frozen=True)
class CycleRecord:
    points: tuple
    multiplier: complex
    classification: str

    @property
    def period(self):
        return len(self.points)

    def rotated(self, start):
        pts = self.points[start:] + self.points[:start]
        return CycleRecord(pts, self.multiplier, self.classification)

    def as_dict(self):
        return {
            "points": [[z.real, z.imag] for z in self.points],
            "multiplier": [self.multiplier.real, self.multiplier.imag],
            "classification": self.classification,
        }


def classify_multiplier(mult, tol=CERT_TOL):
    a = abs(mult)
    if a < 1 - tol:
        return "attracting"
    if a > 1 + tol:
        return "repelling"
    return "indifferent"


def iterate_poly(p, z, n):
    for _ in range(n):
        z = eval_poly(p, z)
    return z


def _iterate_with_derivative(p, dp, z, q):
    val = z
    der = np.ones_like(z)
    for _ in range(q):
        der = der * eval_poly(dp, val)
        val = eval_poly(p, val)
    return val, der


def periodic_points(p, q, tol=1e-12, R=None):
    """All ``d**q`` solutions of ``p^q(z) = z`` (with multiplicity)."""
    dp = derivative(p)
    deg = p.degree ** q
    R = escape_radius(p) if R is None else R

    def func(z):
        v, d = _iterate_with_derivative(p, dp, z, q)
        return v - z, d - 1

    try:
        z = aberth(func, deg, 1.1 * R + 0.1, tol=tol)
    except NonConvergence as exc:
        z = exc.last
    # Newton polish
    for _ in range(4):
        v, d = func(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = v / d
        step[~np.isfinite(step)] = 0
        z = z - step
    return z


def find_cycles(p, max_period=4, tol=CERT_TOL):
    """Periodic cycles of ``p`` with period up to ``max_period`` (<= 8)."""
    if max_period > 8:
        raise ValidationError("max_period must be <= 8")
    dp = derivative(p)
    R = escape_radius(p)
    cycles = []
    seen = []

    def known(z):
        return any(abs(z - s) < 1e-6 * (1 + abs(s)) for s in seen)

    for q in range(1, max_period + 1):
        if p.degree ** q > 4096:
            break
        cands = periodic_points(p, q, R=R)
        for z0, _mult in cluster_roots(cands, tol=1e-7):
            if known(z0):
                continue
            # exact period: smallest divisor of q that closes the orbit
            period = None
            for qq in range(1, q + 1):
                if q % qq == 0 and abs(iterate_poly(p, z0, qq) - z0) < max(tol, 1e-8) * (1 + abs(z0)):
                    period = qq
                    break
            if period != q:
                continue
            pts = [complex(z0)]
            for _ in range(q - 1):
                nxt = complex(eval_poly(p, pts[-1]))
                # snap to the better-conditioned root estimate
                near = cands[np.argmin(np.abs(cands - nxt))]
                pts.append(complex(near) if abs(near - nxt) < 1e-6 else nxt)
            mult = complex(np.prod([eval_poly(dp, z) for z in pts]))
            cycles.append(CycleRecord(tuple(pts), mult, classify_multiplier(mult, tol)))
            seen.extend(pts)
    return cycles


# ---------------------------------------------------------------------------
# escape region


def _basin_radii(p, cycle, rho0):
    """Radii for disks around an attracting cycle, or None if the disk chain
    fails to close up strictly inside itself."""
    circ = _circle(256)
    q = cycle.period
    amu = abs(cycle.multiplier)
    slack = min(0.25, 0.5 * ((1.0 / max(amu, 1e-300)) ** (1.0 / q) - 1.0))
    radii = [rho0]
    for i in range(q):
        c, nxt = cycle.points[i], cycle.points[(i + 1) % q]
        img = np.max(np.abs(eval_poly(p, c + radii[-1] * circ) - nxt))
        if i == q - 1:
            return radii if img < rho0 else None
        radii.append(img * (1 + slack))
    return radii


def basin_disks(p, cycles, R):
    """Disks around every attracting cycle with ``p(disk_i)`` strictly inside
    ``disk_{i+1}``; rho0 is doubled from 1e-4 while this holds."""
    disks = []
    for cyc in cycles:
        if cyc.classification != "attracting":
            continue
        best = None
        rho = 1e-4
        while rho < R:
            radii = _basin_radii(p, cyc, rho)
            if radii is None or any(abs(c) + r >= R for c, r in zip(cyc.points, radii)):
                break
            best = radii
            rho *= 2
        if best is None:
            raise NoAttractingMargin(f"no invariant disk around attracting cycle {cyc.points}")
        disks.extend((complex(c), float(r)) for c, r in zip(cyc.points, best))
    return disks


@dataclass(frozen=True)
class EscapeRegion:
    """``W0 = {|z| > R} u basin disks`` and ``W = W0 x D(0, eps)``.

    ``eps``, ``M`` and ``C1`` are ``None`` for a region built from the base
    polynomial alone (no skew-product attached).
    """

    R: float
    basin_disks: tuple = ()
    eps: float | None = None
    M: float | None = None
    C1: float | None = None
    margin: float | None = None

    def in_W0(self, z):
        z = np.asarray(z)
        out = np.abs(z) > self.R
        for c, r in self.basin_disks:
            out = out | (np.abs(z - c) < r)
        return out

    def depth_W0(self, z):
        """Signed distance into ``W0`` (positive inside)."""
        z = np.asarray(z, complex)
        d = np.abs(z) - self.R
        for c, r in self.basin_disks:
            d = np.maximum(d, r - np.abs(z - c))
        return d

    def in_W(self, z, w):
        if self.eps is None:
            raise ValidationError("region has no fiber thickness")
        return self.in_W0(z) & (np.abs(np.asarray(w)) < self.eps)


def region_from_polynomial(p, max_period=4):
    """The one-dimensional part ``W0`` only; works for any monic p."""
    R = escape_radius(p)
    return EscapeRegion(R, tuple(basin_disks(p, find_cycles(p, max_period), R)))


# ---------------------------------------------------------------------------
# certification


@dataclass(frozen=True)
class CriticalRecord:
    critical_point: complex
    multiplicity: int
    verdict: str
    preperiod: int
    cycle: CycleRecord | None

    def as_dict(self):
        z = self.critical_point
        return {
            "critical_point": [z.real, z.imag],
            "verdict": self.verdict,
            "preperiod": self.preperiod,
            "cycle": None if self.cycle is None else [[c.real, c.imag] for c in self.cycle.points],
            "multiplier": None if self.cycle is None else [self.cycle.multiplier.real, self.cycle.multiplier.imag],
        }


@dataclass(frozen=True)
class SubhypCertificate:
    p: ComplexPoly
    R: float
    critical_records: tuple
    cycles: tuple
    basin_disks: tuple = field(default=())

    def repelling_records(self):
        return [r for r in self.critical_records if r.verdict == "preperiodic_to_repelling"]

    def postcritical_points(self):
        """Every critical orbit point up to and including its landing cycle."""
        pts = []
        for rec in self.critical_records:
            if rec.verdict != "preperiodic_to_repelling":
                continue
            z = rec.critical_point
            for _ in range(rec.preperiod):
                pts.append(z)
                z = complex(eval_poly(self.p, z))
            pts.extend(rec.cycle.points)
        return pts


def critical_points(p):
    """Distinct critical points with multiplicities."""
    return cluster_roots(roots(derivative(p)))


def certify_subhyperbolic(p, budget=DEFAULT_BUDGET, tol=CERT_TOL, max_period=6):
    """Follow every critical orbit until it enters ``W0`` or lands on a
    repelling cycle; raises :class:`Undecided` otherwise."""
    R = escape_radius(p)
    cycles = find_cycles(p, max_period)
    disks = basin_disks(p, cycles, R)
    region = EscapeRegion(R, tuple(disks))
    repelling = [c for c in cycles if c.classification == "repelling"]
    indifferent = [c for c in cycles if c.classification == "indifferent"]
    records = []
    for x0, mult in critical_points(p):
        rec = None
        z = x0
        for n in range(budget + 1):
            if region.in_W0(z):
                landing = None
                for c, r in disks:
                    if abs(z - c) < r:
                        landing = next(cy for cy in cycles if c in cy.points)
                rec = CriticalRecord(x0, mult, "fatou_escapes", n, landing)
                break
            hit = _landing(p, z, repelling, tol)
            if hit is not None:
                rec = CriticalRecord(x0, mult, "preperiodic_to_repelling", n, hit)
                break
            for cy in indifferent:
                if min(abs(z - c) for c in cy.points) < 1e-3:
                    raise Undecided(x0, "orbit approaches an indifferent cycle")
            z = complex(eval_poly(p, z))
        if rec is None:
            raise Undecided(x0, f"no verdict within {budget} iterations")
        records.append(rec)
    return SubhypCertificate(p, R, tuple(records), tuple(cycles), tuple(disks))


def _landing(p, z, repelling, tol):
    for cy in repelling:
        for i, c in enumerate(cy.points):
            if abs(z - c) < tol:
                q = cy.period
                zz = z
                ok = True
                for j in range(1, SHADOW_PERIODS * q + 1):
                    zz = complex(eval_poly(p, zz))
                    if abs(zz - cy.points[(i + j) % q]) >= tol:
                        ok = False
                        break
                if ok:
                    return cy.rotated(i)
    return None


# ---------------------------------------------------------------------------
# fattened region W


def _dF_norm(F, z, w):
    """Operator norm of ``DF = [[f_z, f_w], [0, lam]]`` (largest singular value)."""
    a = eval_family_dz(F.f, z, w)
    b = eval_family_dw(F.f, z, w)
    c = F.lam
    fro = np.abs(a) ** 2 + np.abs(b) ** 2 + abs(c) ** 2
    det = np.abs(a * c)
    return np.sqrt(0.5 * (fro + np.sqrt(np.maximum(fro ** 2 - 4 * det ** 2, 0))))


def _boundary_samples(region, n=720):
    circ = _circle(n)
    faces = [r * circ for r in (region.R, 1.5 * region.R + 1, 3 * region.R + 3)]
    for c, r in region.basin_disks:
        faces.append(c + r * circ)
    return np.concatenate(faces)


def _interior_samples(region, n=720):
    # points of W0 used on the |w| = eps face
    circ = _circle(n // 4)
    pts = [_boundary_samples(region, n)]
    for c, r in region.basin_disks:
        for s in (0.0, 0.5, 0.9):
            pts.append(c + s * r * circ)
    return np.concatenate(pts)


def invariance_margin(F, region, eps, n=720):
    """Sampled ``min`` distance from ``F(boundary of W)`` to the boundary of W
    (negative when the image leaves W)."""
    zb = _boundary_samples(region, n)
    wcirc = eps * _circle(16)
    ws = np.concatenate([[0], 0.5 * wcirc, wcirc])
    Z, Wv = np.meshgrid(zb, ws)
    m1 = np.min(np.minimum(region.depth_W0(eval_family(F.f, Z, Wv)), eps - np.abs(F.lam * Wv)))
    zi = _interior_samples(region, n)
    Z, Wv = np.meshgrid(zi, wcirc)
    m2 = np.min(np.minimum(region.depth_W0(eval_family(F.f, Z, Wv)), eps - np.abs(F.lam * Wv)))
    return float(min(m1, m2))


def derivative_bound(F, R, eps, nz=96, nw=8):
    xs = np.linspace(-(R + 1), R + 1, nz)
    Z = xs[None, :] + 1j * xs[:, None]
    Z = Z[np.abs(Z) <= R + 1]
    r = np.linspace(0, eps, nw)
    th = np.linspace(0, 2 * np.pi, 12, endpoint=False)
    Wv = (r[:, None] * np.exp(1j * th)[None, :]).ravel()
    return float(np.max(_dF_norm(F, Z[None, :], Wv[:, None])))


def containment_violations(F, region, rng, n_points=1000, m_max=10, C1=None):
    """Count sampled failures of: ``d((z,w), U_m) < C1 M^-m  =>  F^(m+1)(z,w) in W``."""
    C1 = region.C1 if C1 is None else C1
    R = region.R
    p_poly = None
    bad = 0
    tried = 0
    for m in range(0, m_max + 1):
        need = n_points // (m_max + 1)
        z = rng.uniform(-R, R, 8 * need) + 1j * rng.uniform(-R, R, 8 * need)
        if p_poly is None:
            from .poly import eval_fiber
            p_poly = eval_fiber(F.f, 0)
        et = escape_time_array(p_poly, region, z, m)
        z = z[et <= m][:need]
        if len(z) == 0:
            continue
        k = len(z)
        rad = C1 * region.M ** (-m) * np.sqrt(rng.uniform(0, 1, k)) * 0.999
        ang = rng.uniform(0, 2 * np.pi, (2, k))
        split = rng.uniform(0, 1, k)
        dz = rad * np.sqrt(split) * np.exp(1j * ang[0])
        dw = rad * np.sqrt(1 - split) * np.exp(1j * ang[1])
        zz, ww = z + dz, dw
        inside = np.zeros(k, bool)
        for _ in range(m + 1):
            zz, ww = eval_family(F.f, zz, ww), F.lam * ww
            # W is forward invariant: freeze orbits once they are in it
            inside |= region.in_W(zz, ww)
            zz = np.where(inside, 0, zz)
        bad += int(np.sum(~inside))
        tried += k
    return bad, tried


def build_escape_region(p, cert, F, seed=0):
    """``W0`` from the certificate, ``eps`` by halving until F maps the sampled
    boundary of W strictly inside, ``M`` by sampling, ``C1 = margin/(M+1)``
    halved until :func:`containment_violations` finds no failure."""
    if any(r.verdict not in ("fatou_escapes", "preperiodic_to_repelling") for r in cert.critical_records):
        raise ValidationError("certificate has undecided entries")
    base = EscapeRegion(cert.R, tuple(cert.basin_disks))
    eps = 0.5
    margin = -1.0
    while eps >= 1e-8:
        margin = invariance_margin(F, base, eps)
        if margin > 0:
            break
        eps /= 2
    else:
        raise NoAttractingMargin("eps fell below 1e-8 without F(W) inside W")
    M = 1.05 * derivative_bound(F, cert.R, eps)
    C1 = margin / (M + 1)
    rng = np.random.default_rng(seed)
    for _ in range(40):
        region = EscapeRegion(cert.R, base.basin_disks, eps, M, C1, margin)
        bad, _ = containment_violations(F, region, rng, n_points=330)
        if bad == 0:
            return region
        C1 /= 2
    raise NoAttractingMargin("could not find C1 passing the sampled escape check")


# ---------------------------------------------------------------------------
# escape time


def escape_time(p, region, z, cap=DEFAULT_CAP):
    """Smallest ``m <= cap`` with ``p^m(z)`` in ``W0``, else ``NOT_ESCAPED``."""
    z = complex(z)
    for m in range(cap + 1):
        if region.in_W0(z):
            return m
        z = complex(eval_poly(p, z))
    return NOT_ESCAPED


def escape_time_array(p, region, z, cap=DEFAULT_CAP):
    """Vectorised :func:`escape_time`; returns a ``uint32`` array."""
    z = np.asarray(z, complex)
    shape = z.shape
    z = z.ravel().copy()
    out = np.full(z.shape, NOT_ESCAPED, dtype=np.uint32)
    idx = np.arange(z.size)
    for m in range(cap + 1):
        hit = region.in_W0(z)
        out[idx[hit]] = m
        keep = ~hit
        z, idx = z[keep], idx[keep]
        if z.size == 0 or m == cap:
            break
        z = eval_poly(p, z)
    return out.reshape(shape)


def box_meets_julia(p, region, z, rho, cap=DEFAULT_CAP, kappa=1.0, extra=6):
    """Conservative test whether the disk ``D(z, rho)`` may meet the Julia set.

    After the centre enters ``W0`` the disk image is approximated to first
    order by ``D(p^n(z), rho * |(p^n)'(z)|)``; the disk is cleared once that
    image, inflated by ``kappa``, lies inside ``W0`` within ``extra`` further
    steps.  Never-escaping centres are kept.
    """
    z = np.asarray(z, complex)
    shape = z.shape
    z = z.ravel().copy()
    dz = np.ones_like(z)
    dp = derivative(p)
    near = np.ones(z.shape, bool)
    t_in = np.full(z.shape, -1, dtype=np.int64)
    idx = np.arange(z.size)
    R = region.R
    n = 0
    while idx.size and n <= cap + extra:
        hit = region.in_W0(z) & (t_in[idx] < 0)
        t_in[idx[hit]] = n
        started = t_in[idx] >= 0
        rad = kappa * rho * np.abs(dz)
        clear = np.abs(z) - rad > R
        for c, r in region.basin_disks:
            clear |= np.abs(z - c) + rad < r
        clear &= started
        near[idx[clear]] = False
        drop = clear | (started & (n - t_in[idx] >= extra)) | (~started & (n >= cap))
        keep = ~drop
        z, dz, idx = z[keep], dz[keep], idx[keep]
        # escaped orbits grow fast; cap them before they overflow
        big = np.abs(z) > 1e150
        if big.any():
            near[idx[big]] = False
            z, dz, idx = z[~big], dz[~big], idx[~big]
        dz = dz * eval_poly(dp, z)
        z = eval_poly(p, z)
        n += 1
    return near.reshape(shape)
