"""The torus ``C / (2 pi i Z + log(mu) Z)`` and orbits ``{s y}`` on it.

Points are handled in lattice coordinates ``(X, Y)`` with
``z = X * 2 pi i + Y * log(mu)`` reduced to the half-open unit square.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .dynamics import NOT_ESCAPED, escape_time_array, escape_radius
from .errors import ClosureMismatch, ValidationError, ZeroInput
from .linearization import _stage_state

TWO_PI_I = 2j * math.pi
SNAP = 1e-12          # coordinates this close to an integer are taken as integers
MAX_DENOMINATOR = 10 ** 6
RELATION_BOUND = 1000
POINT_TOL = 1e-9


@dataclass(frozen=True)
class TorusLattice:
    log_mu: complex

    def __post_init__(self):
        lm = complex(self.log_mu)
        if lm.real == 0:
            raise ValidationError("log(mu) must have nonzero real part")
        object.__setattr__(self, "log_mu", lm)

    @classmethod
    def from_mu(cls, mu):
        mu = complex(mu)
        if mu == 0:
            raise ZeroInput("mu must be nonzero")
        return cls(complex(np.log(mu)))

    @property
    def generators(self):
        return TWO_PI_I, self.log_mu

    def coords(self, z):
        """Real ``(X, Y)`` with ``z = X * 2 pi i + Y * log_mu`` (unreduced)."""
        z = np.asarray(z, complex)
        Y = z.real / self.log_mu.real
        X = (z.imag - Y * self.log_mu.imag) / (2 * math.pi)
        return X, Y

    def point(self, X, Y):
        return X * TWO_PI_I + Y * self.log_mu


def reduce_coords(X, Y):
    """Both coordinates mod 1, with near-integers snapped to 0."""
    out = []
    for c in (X, Y):
        c = np.asarray(c, float)
        r = c - np.floor(c)
        r = np.where((r < SNAP) | (r > 1 - SNAP), 0.0, r)
        out.append(r)
    return out[0], out[1]


@dataclass(frozen=True, eq=False)
class TorusPoint:
    """A point of the torus with lattice coordinates in ``[0, 1)^2``."""

    lattice: TorusLattice
    X: float
    Y: float

    @property
    def rep(self):
        return complex(self.lattice.point(self.X, self.Y))

    def distance(self, other):
        dx = abs(self.X - other.X) % 1.0
        dy = abs(self.Y - other.Y) % 1.0
        return math.hypot(min(dx, 1 - dx), min(dy, 1 - dy))

    def __eq__(self, other):
        return (isinstance(other, TorusPoint) and self.lattice == other.lattice
                and self.distance(other) < POINT_TOL)

    def __hash__(self):
        return hash(self.lattice)

    def multiple(self, s):
        X, Y = reduce_coords(s * self.X, s * self.Y)
        return TorusPoint(self.lattice, float(X), float(Y))

    @classmethod
    def from_coords(cls, lattice, X, Y):
        X, Y = reduce_coords(X, Y)
        return cls(lattice, float(X), float(Y))


def embed_coords(lattice, z):
    """Reduced lattice coordinates of ``log z`` (array version of :func:`embed`)."""
    z = np.asarray(z, complex)
    if np.any(z == 0):
        raise ZeroInput("cannot embed 0")
    return reduce_coords(*lattice.coords(np.log(z)))


def embed(lattice, z):
    z = complex(z)
    X, Y = embed_coords(lattice, z)
    return TorusPoint(lattice, float(X), float(Y))


# ---------------------------------------------------------------------------
# orbit closures


@dataclass(frozen=True)
class Closure:
    """``kind`` is ``"finite"``, ``"line_family"`` or ``"dense"``.

    ``order`` is set for finite closures; ``count`` (number of circles),
    ``relation`` ``(a, b)`` with ``a X + b Y`` integral on the closure, and
    ``direction`` (unit complex number along the circles) for line families.
    """

    kind: str
    coords: tuple
    order: int | None = None
    count: int | None = None
    relation: tuple | None = None
    direction: complex | None = None
    cutoff: int = MAX_DENOMINATOR

    def __str__(self):
        if self.kind == "finite":
            return f"finite({self.order})"
        if self.kind == "line_family":
            return f"line_family({self.count}, {self.direction:.6g})"
        return "dense"


def _convergents(x, max_den):
    """Continued-fraction convergents ``(p, q)`` of ``x`` with ``q <= max_den``."""
    p0, q0, p1, q1 = 0, 1, 1, 0
    r = float(x)
    while True:
        a = math.floor(r)
        p0, q0, p1, q1 = p1, q1, a * p1 + p0, a * q1 + q0
        if q1 > max_den:
            return
        yield p1, q1
        frac = r - a
        if frac < 1e-300:
            return
        r = 1.0 / frac


def _rational(x, tol, max_den):
    """``p/q`` when ``x`` is numerically rational.

    Every convergent satisfies ``|x - p/q| < 1/q^2``, so the tolerance alone
    would call every float rational at denominators near ``1e6``.  A
    convergent is accepted only when it is also far better than that,
    ``|x - p/q| <= 1e-3 / q^2``.
    """
    for p, q in _convergents(x, max_den):
        err = abs(x - p / q)
        if err <= min(tol, 1e-3 / q ** 2):
            return Fraction(p, q)
    return None


def _relation(a, b, tol, bound):
    """Smallest integer ``(i, j) != 0`` with ``i a + j b`` numerically integral.

    The allowance grows with ``|i| + j`` (rounding in the products) but stays
    far below ``1 / bound^2``, the gap a generic pair already achieves.
    """
    i = np.arange(-bound, bound + 1)
    best = None
    for j in range(0, bound + 1):
        v = i * a + j * b
        err = np.abs(v - np.round(v))
        ok = err <= tol * (1 + np.abs(i) + j) / bound
        if j == 0:
            ok &= i > 0
        if ok.any():
            cand = i[ok]
            ii = int(cand[np.argmin(np.abs(cand))])
            size = abs(ii) + j
            if best is None or size < best[0]:
                best = (size, ii, j)
        if best is not None and j > best[0]:
            break
    return None if best is None else (best[1], best[2])


def orbit_closure(lattice, y, tol=1e-10, max_den=MAX_DENOMINATOR, bound=RELATION_BOUND):
    """Closure of ``{s y : s >= 1}``.

    Both coordinates rational (denominator at most ``max_den``) gives a
    finite group; a single integer relation ``a X + b Y in Z`` with
    ``|a|, |b| <= bound`` gives ``gcd(a, b)`` parallel circles; otherwise
    the orbit is dense.
    """
    if not isinstance(y, TorusPoint):
        y = embed(lattice, y)
    X, Y = y.X, y.Y
    fx, fy = _rational(X, tol, max_den), _rational(Y, tol, max_den)
    if fx is not None and fy is not None:
        order = math.lcm(fx.denominator, fy.denominator)
        return Closure("finite", (X, Y), order=order, cutoff=max_den)
    rel = _relation(X, Y, tol, bound)
    if rel is None:
        return Closure("dense", (X, Y), cutoff=max_den)
    a, b = rel
    g = math.gcd(abs(a), abs(b))
    d = complex(lattice.point(b, -a))
    d = d / abs(d)
    if d.real < 0 or (d.real == 0 and d.imag < 0):
        d = -d
    return Closure("line_family", (X, Y), count=g, relation=(a, b), direction=d, cutoff=max_den)


# ---------------------------------------------------------------------------
# equidistribution


def _as_rects(O):
    rects = [tuple(float(v) for v in r) for r in O]
    for x0, x1, y0, y1 in rects:
        if not (0 <= x0 < x1 <= 1 and 0 <= y0 < y1 <= 1):
            raise ValidationError(f"bad rectangle {(x0, x1, y0, y1)}")
    return rects


def in_rects(X, Y, rects):
    X, Y = np.asarray(X), np.asarray(Y)
    out = np.zeros(np.broadcast(X, Y).shape, bool)
    for x0, x1, y0, y1 in rects:
        out |= (X >= x0) & (X < x1) & (Y >= y0) & (Y < y1)
    return out


def rect_union_area(rects):
    """Exact area of a union of axis-aligned rectangles."""
    xs = sorted({v for r in rects for v in r[:2]})
    total = 0.0
    for xa, xb in zip(xs, xs[1:]):
        mid = 0.5 * (xa + xb)
        spans = sorted((r[2], r[3]) for r in rects if r[0] <= mid < r[1])
        covered, cur = 0.0, None
        for lo, hi in spans:
            if cur is None or lo > cur[1]:
                if cur is not None:
                    covered += cur[1] - cur[0]
                cur = [lo, hi]
            else:
                cur[1] = max(cur[1], hi)
        if cur is not None:
            covered += cur[1] - cur[0]
        total += (xb - xa) * covered
    return total


def closure_measure(closure, rects, a=(0.0, 0.0), n_line=1 << 17):
    """Normalized Haar measure of ``O`` on the closure component through ``a``."""
    ax, ay = a
    if closure.kind == "dense":
        return rect_union_area(rects)
    if closure.kind == "finite":
        X, Y = closure.coords
        s = np.arange(closure.order)
        PX, PY = reduce_coords(ax + s * X, ay + s * Y)
        return float(np.mean(in_rects(PX, PY, rects)))
    a_, b_ = closure.relation
    g = closure.count
    a1, b1 = a_ // g, b_ // g
    t = (np.arange(n_line) + 0.5) / n_line
    hits = 0
    for c in range(g):
        # a base point with a1 X + b1 Y = c / g, then move along (b1, -a1)
        bx, by = (c / g / a1, 0.0) if a1 else (0.0, c / g / b1)
        PX, PY = reduce_coords(ax + bx + t * b1, ay + by - t * a1)
        hits += np.count_nonzero(in_rects(PX, PY, rects))
    return hits / (g * n_line)


def orbit_frequency(y, rects, r, n, a=(0.0, 0.0), chunk=1 << 16):
    """Fraction of ``r < s <= r + n`` with ``a + s y`` in ``O``."""
    X, Y = y.X, y.Y
    hits = 0
    for lo in range(r + 1, r + n + 1, chunk):
        s = np.arange(lo, min(lo + chunk, r + n + 1), dtype=float)
        PX, PY = reduce_coords(a[0] + s * X, a[1] + s * Y)
        hits += int(np.count_nonzero(in_rects(PX, PY, rects)))
    return hits / n


def equidistribution_gap(lattice, y, O, r=0, n=1000, a=(0.0, 0.0), closure=None, tol=1e-10):
    """``|#{r < s <= r + n : a + s y in O} / n - measure of O on the closure|``."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    if not isinstance(y, TorusPoint):
        y = embed(lattice, y)
    rects = _as_rects(O)
    closure = orbit_closure(lattice, y, tol) if closure is None else closure
    mu = closure_measure(closure, rects, a)
    if mu == 0:
        raise ClosureMismatch("O does not meet the orbit closure")
    return abs(orbit_frequency(y, rects, r, n, a) - mu)


def gap_series(lattice, y, O, ns, r=0, a=(0.0, 0.0)):
    """``[(n, gap)]`` sharing one closure computation."""
    if not isinstance(y, TorusPoint):
        y = embed(lattice, y)
    cl = orbit_closure(lattice, y)
    return [(n, equidistribution_gap(lattice, y, O, r, n, a, closure=cl)) for n in ns]


def grid_rects(k):
    """The ``k * k`` congruent squares tiling the unit square."""
    h = 1.0 / k
    return [(i * h, (i + 1) * h, j * h, (j + 1) * h) for j in range(k) for i in range(k)]


def fill_check(y, n, res=64):
    """Fraction of the ``res * res`` cells visited by ``s y``, ``s <= n``."""
    s = np.arange(1, n + 1, dtype=float)
    PX, PY = reduce_coords(s * y.X, s * y.Y)
    cells = np.unique(np.minimum((PX * res).astype(int), res - 1) * res
                      + np.minimum((PY * res).astype(int), res - 1))
    return cells.size / res ** 2


# ---------------------------------------------------------------------------
# pullback of the Julia set


@dataclass(frozen=True, eq=False)
class TorusMask:
    """Boolean raster on lattice coordinates: ``mask[j, i]`` is the cell
    ``X in [i/res, (i+1)/res)``, ``Y in [j/res, (j+1)/res)``."""

    mask: np.ndarray
    escape: np.ndarray
    t: np.ndarray

    @property
    def fraction(self):
        return float(self.mask.mean())

    def escape_level(self, O):
        """Smallest ``l`` with every sampled ``t`` whose cell lies in ``O``
        satisfying ``Phi(t) in U_l``; ``None`` if some such ``Phi(t)`` never escapes."""
        res = self.mask.shape[0]
        c = (np.arange(res) + 0.5) / res
        sel = in_rects(c[None, :], c[:, None], _as_rects(O))
        vals = self.escape[sel]
        if vals.size == 0:
            return 0
        if np.any(vals == NOT_ESCAPED):
            return None
        return int(vals.max())


def annulus_samples(lattice, res, eps):
    """One ``t`` per torus cell, placed in ``eps / |mu| < |t| <= eps``."""
    c = (np.arange(res) + 0.5) / res
    z = lattice.point(c[None, :], c[:, None])
    lm = lattice.log_mu.real
    # shift by integer multiples of log_mu so that log|t| lands in (log eps - lm, log eps]
    k = np.ceil((z.real - math.log(eps)) / lm)
    return np.exp(z - k * lattice.log_mu)


def julia_pullback_mask(branch, region, n, res=128, cap=60):
    """Torus mask of ``{t : Phi_n(t) never escapes}`` over one fundamental annulus."""
    if branch.mu is None or branch.k is None:
        raise ValidationError("branch needs landing data and k")
    lattice = TorusLattice.from_mu(branch.mu)
    t = annulus_samples(lattice, res, branch.eps)
    flat = t.ravel()
    st = _stage_state(branch, n, flat, branch.k)
    bound = 10 * escape_radius(branch.F.p)
    gone = np.zeros(flat.shape, bool)
    with np.errstate(all="ignore"):
        for _ in range(branch.q * branch.k * n):
            st.step()
            z = st.z
            gone |= ~np.isfinite(z) | (np.abs(z) > bound)
        z = np.where(gone, 0, st.z)
        et = escape_time_array(branch.F.p, region, z, cap)
    et = np.where(gone, 0, et).astype(np.uint32).reshape(t.shape)
    return TorusMask(et == NOT_ESCAPED, et, t)
