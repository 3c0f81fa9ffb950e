"""Koenigs charts at repelling cycles and the linearization map ``Phi``.

``Phi_n(t) = G^(k n)(gamma(mu^-n t))`` where ``G = F^q`` is the return map
of the landing cycle (period ``q``, multiplier ``mu`` of ``p^q``) and
``gamma(t) = (gamma1(t), t^l)`` parameterises a critical branch of ``F``.
The limit ``Phi`` satisfies ``G^k(Phi(t)) = Phi(mu t)``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .dynamics import critical_points, escape_radius
from .errors import (BranchCollision, OverflowEscape, PreconditionFail,
                     ResonanceBreakdown, StableManifoldBranch, ValidationError)
from .orbit import (PerturbedOrbits, ReferenceOrbit, mul, normalize, power,
                    scaled, to_complex)
from .poly import ComplexPoly, eval_poly, roots

DEFAULT_ORDER = 30


# ---------------------------------------------------------------------------
# power series helpers (coefficient arrays, lowest order first, truncated)


def series_mul(a, b, n):
    return np.convolve(a, b)[:n]


def series_compose(outer, inner, n):
    """``outer(inner(u))`` truncated to ``n`` terms; ``inner(0) = 0``."""
    out = np.zeros(n, complex)
    pw = np.zeros(n, complex)
    pw[0] = 1
    for c in outer[:n]:
        out[: len(pw)] += c * pw
        pw = series_mul(pw, inner, n)
    return out


def return_map_series(p, cycle_points, n):
    """Taylor coefficients at ``u = 0`` of ``p^q(x + u) - x`` for the cycle
    through ``x = cycle_points[0]``."""
    q = len(cycle_points)
    g = np.zeros(n, complex)
    g[1] = 1
    for i in range(q):
        c, nxt = cycle_points[i], cycle_points[(i + 1) % q]
        t = np.zeros(n, complex)
        tc = np.array(p.taylor(c).coeffs, complex)
        t[: min(n, len(tc))] = tc[:n]
        t[0] = 0  # base point maps exactly onto the next cycle point
        g = series_compose(t, g, n)
    return g


@dataclass(frozen=True)
class KoenigsChart:
    fixed_point: complex
    mu: complex
    series: tuple
    radius: float
    period: int = 1
    cycle: tuple = ()

    def __call__(self, z):
        u = np.asarray(z, complex) - self.fixed_point
        acc = np.zeros(u.shape, complex)
        for c in self.series[::-1]:
            acc = acc * u + c
        return acc


def koenigs(p, cycle, order=DEFAULT_ORDER, safety=2.0):
    """Power-series solution of ``psi(g(z)) = mu psi(z)``, ``g = p^q``,
    normalised by ``psi(x) = 0``, ``psi'(x) = 1`` at ``x = cycle.points[0]``.

    The validity radius is a root-test estimate of the convergence radius
    divided by ``safety * |mu|`` so that ``g(z)`` stays inside it too.
    """
    if order > 40:
        raise ValidationError("order must be <= 40")
    if abs(cycle.multiplier) <= 1:
        raise PreconditionFail("Koenigs chart needs a repelling cycle")
    pts = tuple(complex(c) for c in cycle.points)
    n = order + 1
    g = return_map_series(p, pts, n)
    mu = g[1]
    psi = np.zeros(n, complex)
    psi[1] = 1
    gpow = [None, g.copy()]
    for j in range(2, n):
        gpow.append(series_mul(gpow[-1], g, n))
    for k in range(2, n):
        den = mu - mu ** k
        if abs(den) < 1e-12:
            raise ResonanceBreakdown(f"mu^{k} - mu vanishes")
        psi[k] = sum(psi[j] * gpow[j][k] for j in range(1, k)) / den
    mags = [abs(c) ** (1.0 / k) for k, c in enumerate(psi) if k >= max(2, n // 2) and c != 0]
    conv = 1.0 / max(mags) if mags else 1.0
    # polynomial g: series of g itself is finite, so conv can be huge
    conv = min(conv, 10.0 * (1 + abs(pts[0])))
    radius = conv / (safety * abs(mu))
    return KoenigsChart(pts[0], complex(mu), tuple(psi), float(radius), len(pts), pts)


def koenigs_residual(p, chart, z):
    g = z
    for _ in range(chart.period):
        g = eval_poly(p, g)
    return np.abs(chart(g) - chart.mu * chart(z))


def koenigs_iterative(p, cycle, z, n):
    """``mu^n h^n(z - x)`` with ``h`` the local inverse of ``g(u) = p^q(x + u) - x``;
    converges to the Koenigs map.  Works in the offset ``u`` so that the
    tiny preimages keep full relative precision."""
    pts = tuple(complex(c) for c in cycle.points)
    x = pts[0]
    g = ComplexPoly(tuple(return_map_series(p, pts, p.degree ** len(pts) + 1)))
    dg = g.derivative()
    mu = g.coeffs[1]
    y = np.asarray(z, complex) - x
    for _ in range(n):
        v = y / mu
        for _ in range(60):
            step = (eval_poly(g, v) - y) / eval_poly(dg, v)
            v = v - step
            if np.all(np.abs(step) <= 1e-16 * np.abs(v)):
                break
        y = v
    return mu ** n * y


# ---------------------------------------------------------------------------
# critical branches


def _dz_poly(fam, w):
    return ComplexPoly(tuple(eval_poly(P, w) for P in fam.dz()))


def _dz_roots(fam, w):
    P = _dz_poly(fam, w)
    if P.degree == 0:
        return np.array([], complex)
    return np.asarray(roots(P), complex)


def _match(prev, cur):
    """Reorder ``cur`` to follow ``prev`` (minimum total displacement)."""
    cost = np.abs(prev[:, None] - cur[None, :])
    _, cols = linear_sum_assignment(cost)
    return cur[cols]


@dataclass(frozen=True)
class CriticalBranch:
    """``gamma(t) = (x0 + sum_k g_k t^k, t^l)`` for ``|t| <= eps``."""

    F: object
    x0: complex
    l: int
    coeffs: tuple  # g_1, g_2, ... (g_0 = 0)
    eps: float
    r: int | None = None
    x_r: complex | None = None
    mu: complex | None = None
    cycle: tuple = ()
    nu: complex | None = None
    branch_index: int = 0
    k: int | None = None

    @property
    def q(self):
        return max(1, len(self.cycle))

    def gamma1(self, t):
        t = np.asarray(t, complex)
        acc = np.zeros(t.shape, complex)
        for c in self.coeffs[::-1]:
            acc = (acc + c) * t
        return self.x0 + acc

    def offset_scaled(self, t):
        """``gamma1(t) - x0`` for ``t = (mantissa, exponent)``, same form."""
        tm, te = t
        acc = np.zeros(np.shape(tm), complex)
        for kk, c in enumerate(self.coeffs, start=1):
            if c == 0:
                continue
            sh = np.clip((kk - 1) * te, -4000, 0)
            tk = tm ** kk
            acc = acc + c * (np.ldexp(tk.real, sh) + 1j * np.ldexp(tk.imag, sh))
        return normalize(acc, te, cap=None)

    def reference(self):
        """Reference orbit ``x0, p(x0), ...`` by plain iteration."""
        p = self.F.p
        pts = [complex(self.x0)]
        for _ in range(self.r + self.q - 1):
            pts.append(complex(eval_poly(p, pts[-1])))
        return ReferenceOrbit(p, self.x0, self.r, pts[self.r:])

    def with_k(self, k):
        return replace(self, k=int(k))


def branch_data(F, x0, eps=1e-3, n_circle=256, substeps=4, ladder_ratio=0.8, w_min=1e-8):
    """Monodromy order ``l`` and Taylor coefficients of ``gamma1`` for the
    critical branch through ``(x0, 0)``.

    Roots of ``df/dz(., w)`` are continued down the ray ``(0, eps]`` to
    decide which belong to ``x0``, then around ``|w| = eps`` to read off the
    monodromy; the reference root is the one with the largest real part.
    """
    fam = F.f
    base = np.array([c for c, _ in critical_points(F.p)], complex)
    # ladder up from w_min to eps
    ws = [eps * ladder_ratio ** i for i in range(0, 400)]
    ws = [w for w in ws if w >= w_min][::-1]
    cur = _dz_roots(fam, ws[0])
    own = np.array([np.argmin(np.abs(base - z)) for z in cur])
    x_idx = np.argmin(np.abs(base - x0))
    for w in ws[1:]:
        cur = _match(cur, _dz_roots(fam, w))
    mine = own == x_idx
    if not mine.any():
        raise ValidationError(f"no critical branch through {x0}")
    at_eps = cur.copy()
    # monodromy around |w| = eps
    m = n_circle * substeps
    track = at_eps.copy()
    for i in range(1, m + 1):
        nxt = _match(track, _dz_roots(fam, eps * cmath.exp(2j * math.pi * i / m)))
        if len(nxt) > 1:
            diff = np.abs(nxt[:, None] - nxt[None, :]) + np.eye(len(nxt))
            if diff.min() < 1e-6:
                raise BranchCollision(f"critical branches within 1e-6 at |w| = {eps}")
        track = nxt
    perm = np.array([np.argmin(np.abs(at_eps - z)) for z in track])
    cand = np.flatnonzero(mine)
    ref = cand[np.argmax(at_eps[cand].real)]
    l, j = 1, perm[ref]
    while j != ref:
        j = perm[j]
        l += 1
    # gamma1 on |t| = rho, w = t^l goes l times around
    rho = eps ** (1.0 / l)
    N = n_circle
    vals = np.empty(N, complex)
    allr = at_eps.copy()
    # _match keeps every root at its slot, so slot ``ref`` follows gamma1
    for i in range(N * substeps):
        if i % substeps == 0:
            vals[i // substeps] = allr[ref]
        th = 2 * math.pi * (i + 1) / (N * substeps)
        allr = _match(allr, _dz_roots(fam, eps * cmath.exp(1j * l * th)))
    c = np.fft.fft(vals) / N
    kk = np.arange(N // 2)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        # high orders underflow rho**k; their tiny c_k are zeroed below
        g = c[: N // 2] / rho ** kk
    if abs(g[0] - x0) > 1e-6 * (1 + abs(x0)):
        raise ValidationError("branch continuation did not return to the critical point")
    coeffs = g[1: N // 2].copy()
    scale = max(np.max(np.abs(c)), 1.0)
    coeffs[np.abs(c[1: N // 2]) < 1e-14 * scale] = 0
    nz = np.flatnonzero(coeffs)
    coeffs = coeffs[: nz[-1] + 1] if nz.size else np.zeros(0, complex)
    return int(l), tuple(complex(v) for v in coeffs), float(rho)


def detect_branch(F, cert=None, which=0, eps=1e-3, branch_index=0):
    """Critical branch through the ``which``-th critical point.

    With a certificate the landing data (preperiod, cycle, multiplier) are
    attached; the record must be ``preperiodic_to_repelling``.
    """
    if cert is not None:
        rec = cert.critical_records[which]
        if rec.verdict != "preperiodic_to_repelling":
            raise PreconditionFail("critical point is not preperiodic to a repelling cycle")
        x0 = rec.critical_point
    else:
        x0 = critical_points(F.p)[which][0]
        rec = None
    l, coeffs, rho = branch_data(F, x0, eps)
    nu = complex(F.lam) ** (1.0 / l) * cmath.exp(2j * math.pi * branch_index / l)
    kw = {}
    if rec is not None:
        kw = dict(r=rec.preperiod, x_r=rec.cycle.points[0], mu=rec.cycle.multiplier,
                  cycle=tuple(rec.cycle.points))
    return CriticalBranch(F, complex(x0), l, coeffs, rho, nu=nu, branch_index=branch_index, **kw)


# ---------------------------------------------------------------------------
# Phi_n


@dataclass(eq=False)
class PhiApprox:
    branch: CriticalBranch | None
    n: int
    k: int
    t: np.ndarray
    values: np.ndarray
    w: np.ndarray
    cauchy_gap: float | None = None
    state: object = field(default=None, repr=False)
    func: object = field(default=None, repr=False)


def default_samples(eps, n=64):
    """``n`` points split over the circles ``|t| = eps/4, eps/2, eps``."""
    out = []
    for i, r in enumerate((0.25, 0.5, 1.0)):
        m = n // 3 + (1 if i < n % 3 else 0)
        th = 2 * math.pi * (np.arange(m) + 0.5 * i) / m
        out.append(r * eps * np.exp(1j * th))
    return np.concatenate(out)


def max_stage(branch, eps=None):
    eps = branch.eps if eps is None else eps
    return int(math.floor((math.log(eps) - math.log(1e-280)) / math.log(abs(branch.mu))))


def _stage_state(branch, n, t, k):
    """Orbits ``G^(k n)(gamma(mu^-n t))`` in perturbative form."""
    t = np.atleast_1d(np.asarray(t, complex))
    ts = mul(power(1 / branch.mu, np.full(t.shape, n)), scaled(t))
    delta = branch.offset_scaled(ts)
    tm, te = ts
    w = normalize(tm ** branch.l, branch.l * te, cap=None)
    return PerturbedOrbits.start(branch.F, branch.reference(), delta, w)


def _run_checked(state, steps, bound):
    for _ in range(steps):
        state.step()
        z = state.z
        if not np.all(np.isfinite(z)) or np.any(np.abs(z) > bound):
            raise OverflowEscape(f"orbit left D(0, {bound:.3g}) at step {state.j}")
    return state


def phi_values(branch, n, t, k=None):
    """``(Phi_n(t), state)``; raises :class:`OverflowEscape` when an orbit
    exceeds ``10 R`` before the stage completes."""
    k = branch.k if k is None else k
    if k is None:
        raise ValidationError("local order k is not known; pass k")
    if n > max_stage(branch):
        raise ValidationError(f"stage {n} would underflow mu^-n * eps")
    bound = 10 * escape_radius(branch.F.p)
    st = _run_checked(_stage_state(branch, n, t, k), branch.q * k * n, bound)
    return st.z, st


def phi_stage(branch, F, n, samples=None, k=None):
    """Stage ``n`` of the linearization on ``samples`` (with the Cauchy gap
    to stage ``n - 1``)."""
    if F is not branch.F and F != branch.F:
        raise ValidationError("branch belongs to a different map")
    k = branch.k if k is None else k
    t = default_samples(branch.eps) if samples is None else np.atleast_1d(np.asarray(samples, complex))
    if np.any(np.abs(t) > branch.eps * (1 + 1e-12)):
        raise ValidationError("samples must satisfy |t| <= eps")
    vals, st = phi_values(branch, n, t, k)
    gap = None
    if n >= 1:
        prev, _ = phi_values(branch, n - 1, t, k)
        gap = float(np.max(np.abs(vals - prev)))
    return PhiApprox(branch, n, k, t, vals, st.w, gap, st)


def phi_sequence(branch, F, ns, samples=None, k=None):
    return [phi_stage(branch, F, n, samples, k) for n in ns]


def gap_ratios(seq):
    gaps = [s.cauchy_gap for s in seq]
    return [b / a for a, b in zip(gaps, gaps[1:]) if a > 0]


def functional_equation_residual(phi, F, samples=None):
    """``sup |G^k(Phi_n(t), w_n(t)) - Phi_n(mu t)|`` over the samples."""
    if phi.branch is None:
        # explicit data: Phi given by phi.func, G = F
        t = phi.t if samples is None else np.asarray(samples, complex)
        z = phi.func(t) + 0j
        w = np.zeros_like(z) if phi.w is None else np.broadcast_to(phi.w, z.shape)
        for _ in range(phi.k):
            z, w = F.f(z, w), F.lam * w
        return float(np.max(np.abs(z - phi.func(phi.mu_hint * t))))
    br = phi.branch
    if samples is not None and not np.array_equal(np.asarray(samples, complex), phi.t):
        phi = phi_stage(br, F, phi.n, samples, phi.k)
    lhs = phi.state.copy()
    for _ in range(br.q * phi.k):
        lhs.step()
    rhs, _ = phi_values(br, phi.n, br.mu * phi.t, phi.k)
    return float(np.max(np.abs(lhs.z - rhs)))


def constant_phi(value, t, mu, k=1):
    """A :class:`PhiApprox` for explicitly given data ``Phi = value``."""
    t = np.asarray(t, complex)
    ph = PhiApprox(None, 0, k, t, np.full(t.shape, complex(value)), np.zeros(t.shape, complex),
                   func=lambda s: np.full(np.shape(s), complex(value)))
    ph.mu_hint = mu
    return ph


def explicit_phi(func, t, mu, k=1):
    t = np.asarray(t, complex)
    ph = PhiApprox(None, 0, k, t, func(t), np.zeros(t.shape, complex), func=func)
    ph.mu_hint = mu
    return ph


# ---------------------------------------------------------------------------
# local order


def local_order(func, radii, n_angles=16):
    """Slope of ``log mean |func(t) - func(0)|`` against ``log |t|``."""
    radii = np.asarray(radii, float)
    th = 2 * math.pi * (np.arange(n_angles) + 0.25) / n_angles
    f0 = func(np.zeros(1, complex))[0]
    ys = []
    for r in radii:
        v = func(r * np.exp(1j * th))
        ys.append(np.mean(np.log(np.abs(v - f0))))
    slope, _ = np.polyfit(np.log(radii), ys, 1)
    return float(slope)


def detect_order_k(branch, F, candidates=(1, 2, 3, 4), N=None):
    """Smallest candidate ``k`` for which ``Phi_N`` is neither constant nor
    blowing up and whose local vanishing order at 0 fits ``k``."""
    if not candidates or min(candidates) < 1:
        raise ValidationError("candidates must be nonempty and >= 1")
    N = min(24, max_stage(branch) - 2) if N is None else N
    radii = branch.eps * 2.0 ** -np.arange(4, 11)
    probe = default_samples(branch.eps, 24)
    constant = 0
    for k in sorted(candidates):
        try:
            v, _ = phi_values(branch, N, probe, k)
            v0, _ = phi_values(branch, N, np.zeros(1), k)
        except OverflowEscape:
            continue
        if np.max(np.abs(v - v0[0])) < 1e-10:
            constant += 1
            continue

        def f(t, k=k):
            return phi_values(branch, N, t, k)[0]

        try:
            slope = local_order(f, radii)
        except OverflowEscape:
            continue
        if abs(slope - k) < 0.25:
            return k
    if constant == len(candidates):
        raise StableManifoldBranch("Phi_N is constant for every candidate k")
    raise ValidationError(f"no candidate k in {tuple(candidates)} fits")
