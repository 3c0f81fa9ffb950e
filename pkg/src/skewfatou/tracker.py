"""Escape bookkeeping for critical orbits in nearby fibers.

For a branch point ``gamma(nu^s u)`` (so in the fiber ``lam^s w0`` when
``u^l = w0``) the orbit first shadows the postcritical set, then follows
``Phi`` out along the unstable manifold, and finally lands in ``W``.
This module measures when that happens.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .dynamics import NOT_ESCAPED, escape_time_array
from .errors import DegenerateFit, NotResonant, PreconditionFail, ValidationError
from .linearization import phi_values
from .orbit import PerturbedOrbits, mul, normalize, power, scaled, to_complex

NEAR_POSTCRITICAL = "NEAR_POSTCRITICAL"
IN_W = "IN_W"
OUTSIDE = "OUTSIDE"

mpmath.mp.dps = 50


# ---------------------------------------------------------------------------
# schedules


def _log_abs(x):
    return mpmath.log(abs(mpmath.mpc(complex(x))))


def j_of_s(mu, nu, s):
    """The integer ``j`` with ``|mu|^-1 < |mu^j nu^s| <= 1``.

    ``mu``/``nu`` may be a branch (its ``mu`` and ``nu`` are used).  The
    float guess ``floor(s log|1/nu| / log|mu|)`` is corrected with 50-digit
    logarithms of the given moduli; exact ties (``|mu^j nu^s| = 1``) count
    as ``<= 1``.
    """
    if s < 0:
        raise ValidationError("s must be >= 0")
    lm, ln = _log_abs(mu), _log_abs(nu)
    if not (lm > 0 > ln):
        raise ValidationError("need |nu| < 1 < |mu|")
    j = int(math.floor(s * float(-ln) / float(lm)))
    tie = mpmath.mpf(10) ** -35

    def L(jj):
        return jj * lm + s * ln

    for _ in range(4):
        v = L(j)
        if v > tie:
            j -= 1
        elif v <= -lm + tie:
            j += 1
        else:
            break
    return j


def schedule_modulus_ok(mu, nu, s, j):
    """Check ``|mu|^-1 < |mu^j nu^s| <= 1`` in 50-digit arithmetic."""
    lm, ln = _log_abs(mu), _log_abs(nu)
    v = j * lm + s * ln
    tie = mpmath.mpf(10) ** -35
    return bool(-lm + tie < v <= tie)


def m_of_s(alpha, C8, s):
    """``max(0, ceil(2 log s / |log alpha| - C8))``."""
    if s < 1:
        raise ValidationError("s must be >= 1")
    if not 0 < alpha < 1:
        raise ValidationError("alpha must lie in (0, 1)")
    return max(0, int(math.ceil(2 * math.log(s) / abs(math.log(alpha)) - C8)))


@dataclass(frozen=True)
class EscapeSchedule:
    branch: object
    alpha: float
    C8: float = 0.0
    alpha_data: tuple = field(default=(), repr=False)

    def j(self, s):
        return j_of_s(self.branch.mu, self.branch.nu, s)

    def m(self, s):
        return m_of_s(self.alpha, self.C8, s)

    def j_table(self, s_values):
        return [self.j(s) for s in s_values]

    def m_table(self, s_values):
        return [self.m(s) for s in s_values]


# ---------------------------------------------------------------------------
# branch point orbits


def branch_start(branch, s, u):
    """Perturbative start states for ``gamma(nu^s u)``; ``s`` and ``u`` are
    broadcast against each other."""
    s, u = np.broadcast_arrays(np.asarray(s, np.int64), np.asarray(u, complex))
    t = mul(power(branch.nu, s), scaled(u))
    delta = branch.offset_scaled(t)
    tm, te = t
    w = normalize(tm ** branch.l, branch.l * te, cap=None)
    return delta, w


def branch_orbits(F, branch, s, u, region=None):
    delta, w = branch_start(branch, s, u)
    return PerturbedOrbits.start(F, branch.reference(), delta, w, region=region)


def lth_roots(w0, l):
    r = complex(w0) ** (1.0 / l)
    return r * np.exp(2j * np.pi * np.arange(l) / l)


def postcritical_disks(cert, radius=0.05):
    return tuple((complex(z), float(radius)) for z in cert.postcritical_points())


def in_disks(z, disks):
    z = np.asarray(z)
    out = np.zeros(z.shape, bool)
    for c, r in disks:
        out |= np.abs(z - c) < r
    return out


@dataclass(frozen=True)
class NonEscapeCount:
    w0: complex
    U: tuple
    counts: tuple  # (n, #S_n)
    fail: np.ndarray = field(repr=False, default=None)

    def ratio_to_log(self):
        return [c / math.log(n + 2) for n, c in self.counts]


def count_non_escaped(F, branch, region, w0, U, n_max, check_U=True, cert=None):
    """``#S_n = #{s <= n : F_1^(n-s)(gamma(nu^s u)) not in W0 u U}`` for
    ``n <= n_max``, with ``s`` counted when any ``l``-th root ``u`` of ``w0``
    fails.  All ``s`` are iterated together, so the cost is ``n_max**2``
    orbit steps."""
    if abs(w0) > branch.eps ** branch.l * (1 + 1e-12):
        raise PreconditionFail("w0 must lie within eps^l of 0")
    if check_U and cert is not None:
        pts = np.array(cert.postcritical_points())
        if len(pts) and not np.all(in_disks(pts, U)):
            raise PreconditionFail("U does not cover the postcritical set")
    S = np.arange(n_max + 1)
    fail = np.zeros((n_max + 1, n_max + 1), bool)  # fail[s, n - s]
    for u in lth_roots(w0, branch.l):
        orb = branch_orbits(F, branch, S, np.full(S.shape, u), region=region)
        for t in range(n_max + 1):
            if t:
                orb.step()
            live = S <= n_max - t
            z = orb.z[live]
            ok = orb.frozen[live] | region.in_W0(z) | in_disks(z, U)
            fail[S[live], t] |= ~ok
    counts = []
    for n in range(n_max + 1):
        s = np.arange(n + 1)
        counts.append((n, int(np.count_nonzero(fail[s, n - s]))))
    return NonEscapeCount(complex(w0), tuple(U), tuple(counts), fail)


def critical_count_bound(d, count, branches=1):
    """The degree-style bound ``d ** (count * branches)``."""
    return d ** (count * branches)


def phase_classify(F, branch, region, U, s, n, u):
    """Region visited by ``F^n(gamma(nu^s u))``; ``W`` is tested before ``U``."""
    orb = branch_orbits(F, branch, np.atleast_1d(s), np.atleast_1d(complex(u)), region=region)
    orb.run(n)
    z, frozen = orb.z[0], orb.frozen[0]
    if frozen or (region.in_W0(z) and abs(orb.w[0]) < region.eps):
        return IN_W
    if in_disks(z, U):
        return NEAR_POSTCRITICAL
    return OUTSIDE


def phase_profile(F, branch, region, U, s, u, n_max):
    """Phase after every ``n <= n_max`` steps from ``gamma(nu^s u)``."""
    orb = branch_orbits(F, branch, np.atleast_1d(s), np.atleast_1d(complex(u)), region=region)
    out = []
    for n in range(n_max + 1):
        if n:
            orb.step()
        z = orb.z[0]
        if orb.frozen[0] or (region.in_W0(z) and abs(orb.w[0]) < region.eps):
            out.append(IN_W)
        elif in_disks(z, U):
            out.append(NEAR_POSTCRITICAL)
        else:
            out.append(OUTSIDE)
    return out


def mid_range_fraction(F, branch, region, U, s_values, us, k=None):
    """Fraction of ``(s, u)`` whose orbit is NEAR_POSTCRITICAL throughout
    ``n in [k j(s)/4, k j(s)/2]``."""
    k = branch.k or 1 if k is None else k
    good = total = 0
    for s in s_values:
        j = j_of_s(branch.mu, branch.nu, s)
        lo, hi = (k * j * branch.q) // 4, (k * j * branch.q) // 2
        for u in us:
            prof = phase_profile(F, branch, region, U, s, u, hi)
            total += 1
            good += all(ph == NEAR_POSTCRITICAL for ph in prof[lo: hi + 1])
    return good / total if total else float("nan")


def fit_alpha(F, branch, region, s_values, m_values, n_grid=24, k=None):
    """Decay rate ``alpha`` of the parameter area
    ``{u in D(0, eps) : F^(k j(s) + m + 1)(gamma(nu^s u)) not in W}`` in ``m``."""
    k = branch.k or 1 if k is None else k
    xs = (np.arange(n_grid) + 0.5) / n_grid * 2 - 1
    U = (xs[None, :] + 1j * xs[:, None]).ravel()
    U = U[np.abs(U) < 1] * branch.eps
    cell = (2 * branch.eps / n_grid) ** 2
    rows = []
    for s in s_values:
        j = j_of_s(branch.mu, branch.nu, s)
        base = branch.q * k * j
        orb = branch_orbits(F, branch, np.full(U.shape, s), U, region=region)
        orb.run(base)
        mset = sorted(m_values)
        done = 0
        for m in mset:
            orb.run(m + 1 - done)
            done = m + 1
            outside = ~(orb.frozen | (region.in_W0(orb.z) & (np.abs(orb.w) < region.eps)))
            rows.append((s, m, float(np.count_nonzero(outside)) * cell))
    ms = np.array([m for _, m, a in rows if a > 0], float)
    ys = np.log([a for _, m, a in rows if a > 0])
    if len(set(ms)) < 2:
        raise DegenerateFit("not enough positive areas to fit alpha")
    slope, _ = np.polyfit(ms, ys, 1)
    alpha = float(np.clip(math.exp(slope), 1e-6, 1 - 1e-6))
    return alpha, tuple(rows)


# ---------------------------------------------------------------------------
# resonant case


@dataclass(eq=False)
class ResonantGrid:
    """``a[n, m] = F^(n+m)(x0, lam^n w0)`` for ``n <= n_max``, ``|m| <= m_range``,
    ``n + m >= 0``, stored as perturbative states; ``z[t, n]`` is the first
    coordinate after ``t = n + m`` steps, ``NaN`` once the orbit is in ``W``."""

    F: object
    branch: object
    w0: complex
    n_max: int
    m_range: int
    z: np.ndarray
    states: list = field(repr=False)
    region: object = None

    def entry(self, n, m):
        t = n + m
        if not (0 <= n <= self.n_max and abs(m) <= self.m_range and t >= 0):
            raise KeyError((n, m))
        return self.z[t, n]

    def second_coordinate(self, n, m):
        """``lam^(n+m) * (lam^n w0)`` by power arithmetic."""
        return _w_power(self.F.lam, self.w0, np.array([n]), np.array([n + m]))

    def entries(self, n_min=0):
        for n in range(n_min, self.n_max + 1):
            for m in range(-min(n, self.m_range), self.m_range + 1):
                v = self.z[n + m, n]
                if np.isfinite(v):
                    yield n, m, v

    def limits(self):
        """``{m: (estimate, gap)}`` from the deepest two rows."""
        out = {}
        n = self.n_max
        for m in range(-self.m_range, self.m_range + 1):
            if n + m < 0 or n - 1 + m < 0:
                continue
            a, b = self.z[n + m, n], self.z[n - 1 + m, n - 1]
            if np.isfinite(a) and np.isfinite(b):
                out[m] = (complex(a), float(abs(a - b)))
        return out

    def step_state(self, t):
        """Apply ``F`` to the stored states at step ``t`` (fresh copy)."""
        st = _copy_state(self.states[t])
        _grid_step(st, self.F.lam, self.w0)
        return st

    def identity_holds(self):
        """``F(a[n, m]) == a[n, m+1]`` bit for bit on every live entry."""
        for t in range(len(self.states) - 1):
            nxt = self.step_state(t)
            cur = self.states[t + 1]
            live = ~self.states[t]["frozen"]
            for key in ("d", "e", "wm", "ew"):
                if not np.array_equal(nxt[key][live], cur[key][live]):
                    return False
        return True


def _w_power(lam, w0, n, t):
    """Mantissa/exponent of ``lam^t * lam^n * w0``."""
    return mul(mul(power(lam, t), power(lam, n)), scaled(np.full(np.shape(n), complex(w0))))


def _snapshot(orb, n_idx, t):
    return {"d": orb.d.copy(), "e": orb.e.copy(), "wm": orb.wm.copy(), "ew": orb.ew.copy(),
            "frozen": orb.frozen.copy(), "zf": orb.zf.copy(), "j": orb.j, "n": n_idx, "t": t,
            "orb": orb}


def _copy_state(st):
    out = dict(st)
    for key in ("d", "e", "wm", "ew", "frozen", "zf"):
        out[key] = st[key].copy()
    return out


def _grid_step(st, lam, w0):
    orb = st["orb"].copy()
    orb.d, orb.e, orb.wm, orb.ew = st["d"].copy(), st["e"].copy(), st["wm"].copy(), st["ew"].copy()
    orb.frozen, orb.zf, orb.j = st["frozen"].copy(), st["zf"].copy(), st["j"]
    orb.step()
    t = st["t"] + 1
    orb.wm, orb.ew = _w_power(lam, w0, st["n"], np.full(st["n"].shape, t))
    st.update(d=orb.d, e=orb.e, wm=orb.wm, ew=orb.ew, frozen=orb.frozen, zf=orb.zf, j=orb.j, t=t)
    return st


def resonant_grid(F, branch, w0, n_max=60, m_range=40, region=None):
    if branch.mu is None or abs(branch.mu * F.lam - 1) > 1e-12:
        raise NotResonant(f"mu * lam = {None if branch.mu is None else branch.mu * F.lam}")
    n_idx = np.arange(n_max + 1)
    delta = normalize(np.zeros(n_idx.shape, complex), np.zeros(n_idx.shape, np.int64), cap=None)
    w = _w_power(F.lam, w0, n_idx, np.zeros(n_idx.shape, np.int64))
    orb = PerturbedOrbits.start(F, branch.reference(), delta, w, region=region)
    T = n_max + m_range
    zs = np.full((T + 1, n_max + 1), np.nan + 0j)
    states = []
    st = _snapshot(orb, n_idx, 0)
    for t in range(T + 1):
        if t:
            st = _grid_step(_copy_state(st), F.lam, w0)
        states.append(st)
        o = st["orb"]
        z = o.ref.point(st["j"]) + to_complex(st["d"], st["e"])
        z = np.where(st["frozen"], np.nan, z)
        m = t - n_idx
        valid = (np.abs(m) <= m_range)
        zs[t] = np.where(valid, z, np.nan)
    return ResonantGrid(F, branch, complex(w0), n_max, m_range, zs, states, region)


def avoidance_radius(grid, y, N, postcritical=None, R=None):
    """Largest ``delta`` with no table entry (``n >= N``) in ``D(y, delta)``."""
    y = complex(y)
    if postcritical is not None and min(abs(y - c) for c in postcritical) < 1e-6:
        raise ValidationError("y lies on the postcritical arc")
    if R is not None and abs(y) >= R:
        raise ValidationError("y must lie in D(0, R)")
    pts = np.array([v for n, m, v in grid.entries(N)])
    if pts.size == 0:
        return float("inf")
    return float(np.min(np.abs(pts - y)))


# ---------------------------------------------------------------------------
# fiber disk images


class AreaDecay(list):
    """``[(n, area)]`` with the per-step survivor counts and the number of
    containment violations attached."""

    def __init__(self, rows, survivors, violations):
        super().__init__(rows)
        self.survivors = tuple(survivors)
        self.violations = int(violations)


def fiber_disk_area_decay(F, region, w0, disk, n_max, raster_res=256, stop=0.99):
    """Occupancy area of the surviving images of a disk in the fiber ``w0``.

    The disk is sampled on a ``raster_res`` square grid and each image
    cloud is measured on cells of side ``radius/256``; the sequence stops
    once more than ``stop`` of the samples are in ``W``.  ``violations``
    counts samples still outside ``W`` at step ``n + m(n) + 1`` whose
    step-``n`` image lies in ``U_m(n)``, with ``m(n)`` the largest ``m``
    such that ``|lam^n w0| < C1 M^-m``.  There should be none.
    """
    c, rad = complex(disk[0]), float(disk[1])
    if abs(c) + rad >= region.R:
        raise ValidationError("disk must lie in D(0, R)")
    xs = (np.arange(raster_res) + 0.5) / raster_res * 2 - 1
    g = (xs[None, :] + 1j * xs[:, None]).ravel()
    g = g[np.abs(g) < 1]
    z = c + rad * g
    w = np.full(z.shape, complex(w0))
    cell = rad / 256
    n_tot = z.size
    p = F.p
    hist_z = [z.copy()]
    inW = [region.in_W(z, w)]
    # run far enough to decide the containment check for every n
    horizon = n_max + (_m_of_n(region, F.lam, w0, n_max) or 0) + 2
    zz, ww = z.copy(), w.copy()
    absorbed = inW[0].copy()
    for step in range(1, horizon + 1):
        zz = np.where(absorbed, 0, zz)
        zz, ww = F.f(zz, ww), F.lam * ww
        absorbed |= region.in_W(zz, ww)
        hist_z.append(np.where(absorbed, np.nan, zz))
        inW.append(absorbed.copy())
    rows, surv = [], []
    violations = 0
    for n in range(n_max + 1):
        alive = ~inW[n]
        if alive.sum() <= (1 - stop) * n_tot:
            break
        pts = hist_z[n][alive]
        cells = np.unique(np.stack([np.floor(pts.real / cell), np.floor(pts.imag / cell)]), axis=1)
        rows.append((n, cells.shape[1] * cell * cell))
        surv.append(int(alive.sum()))
        m = _m_of_n(region, F.lam, w0, n)
        if m is not None and n + m + 1 < len(inW):
            still_out = ~inW[n + m + 1]
            et = escape_time_array(p, region, hist_z[n][still_out], m)
            violations += int(np.count_nonzero(et != NOT_ESCAPED))
    return AreaDecay(rows, surv, violations)


def _m_of_n(region, lam, w0, n):
    """Largest ``m`` with ``|lam^n w0| < C1 M^-m`` (None if none)."""
    lw = math.log(abs(w0)) + n * math.log(abs(lam))
    # C1 M^-m > |lam^n w0|  <=>  m < (log C1 - lw) / log M
    x = (math.log(region.C1) - lw) / math.log(region.M)
    if x <= 0:
        return None
    m = int(math.ceil(x) - 1)
    return max(m, 0)


def fit_log_slope(rows):
    ns = np.array([r[0] for r in rows], float)
    ys = np.log([r[1] for r in rows])
    if len(ns) < 3:
        raise DegenerateFit("need 3 rows to fit a slope")
    slope, _ = np.polyfit(ns, ys, 1)
    return float(slope)
