"""Poincare geometry of the unit disk and finite Blaschke products.

Lengths use the density ``2 |dz| / (1 - |z|^2)`` and areas
``4 / (1 - |z|^2)^2``, so a hyperbolic disk of radius ``s`` has area
``4 pi sinh(s/2)^2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import CountMismatch, HypothesisFail, PreconditionFail, ValidationError
from .poly import ComplexPoly

C3 = 1 + 2 ** 12 * math.pi
RANDOM_ZERO_RADIUS = 0.95


def _check_disk(*zs):
    for z in zs:
        if np.any(np.abs(np.asarray(z)) >= 1):
            raise ValidationError("points must lie in the open unit disk")


def pseudo_distance(z1, z2):
    z1, z2 = np.asarray(z1, complex), np.asarray(z2, complex)
    return np.abs((z1 - z2) / (1 - np.conj(z2) * z1))


def hyp_distance(z1, z2):
    """``2 artanh |(z1 - z2) / (1 - conj(z2) z1)|``."""
    _check_disk(z1, z2)
    d = 2 * np.arctanh(np.minimum(pseudo_distance(z1, z2), 1.0))
    return float(d) if np.ndim(d) == 0 else d


def mobius(a, rotation=1.0):
    """Disk automorphism ``z -> rotation (z - a) / (1 - conj(a) z)``."""
    a, rot = complex(a), complex(rotation)
    return lambda z: rot * (np.asarray(z) - a) / (1 - a.conjugate() * np.asarray(z))


# ---------------------------------------------------------------------------
# sets


@dataclass(frozen=True)
class HypDisk:
    """Hyperbolic disk with hyperbolic ``center`` and ``radius``."""

    center: complex
    radius: float

    @classmethod
    def from_euclidean_origin(cls, r):
        """The Euclidean disk ``D(0, r)``."""
        return cls(0j, 2 * math.atanh(r))

    @classmethod
    def with_area(cls, center, area):
        return cls(complex(center), 2 * math.asinh(math.sqrt(area / (4 * math.pi))))

    @property
    def area(self):
        return 4 * math.pi * math.sinh(self.radius / 2) ** 2

    @property
    def euclidean(self):
        """``(center, radius)`` of the same set as a Euclidean disk."""
        c, rho = complex(self.center), math.tanh(self.radius / 2)
        k = 1 - rho * rho * abs(c) ** 2
        return c * (1 - rho * rho) / k, rho * (1 - abs(c) ** 2) / k

    def contains(self, w):
        w = np.asarray(w, complex)
        inside = np.abs(w) < 1
        pd = pseudo_distance(np.where(inside, w, 0), self.center)
        return inside & (pd < math.tanh(self.radius / 2))


@dataclass(frozen=True, eq=False)
class HypSet:
    """Pixel mask on the grid ``bounds = (x0, x1, y0, y1)``; ``mask[j, i]``
    is the pixel centred at ``x0 + (i + 0.5) dx + 1j (y0 + (j + 0.5) dy)``."""

    mask: np.ndarray
    bounds: tuple = (-1.0, 1.0, -1.0, 1.0)

    @property
    def dx(self):
        return (self.bounds[1] - self.bounds[0]) / self.mask.shape[1]

    @property
    def dy(self):
        return (self.bounds[3] - self.bounds[2]) / self.mask.shape[0]

    def centers(self):
        return grid_centers(self.bounds, self.mask.shape[1], self.mask.shape[0])

    def guard(self):
        """Pixels kept for area integrals: ``|z| < 1 - (pixel width)``."""
        return np.abs(self.centers()) < 1 - max(self.dx, self.dy)


def grid_centers(bounds, nx, ny=None):
    ny = nx if ny is None else ny
    x0, x1, y0, y1 = bounds
    x = x0 + (np.arange(nx) + 0.5) * (x1 - x0) / nx
    y = y0 + (np.arange(ny) + 0.5) * (y1 - y0) / ny
    return x[None, :] + 1j * y[:, None]


def disk_grid(resolution):
    return grid_centers((-1.0, 1.0, -1.0, 1.0), resolution)


def hyp_area(s):
    """Poincare area of a :class:`HypDisk` (closed form) or :class:`HypSet`
    (midpoint rule, guard band excluded)."""
    if isinstance(s, HypDisk):
        return s.area
    if not s.mask.any():
        return 0.0
    z = s.centers()
    keep = s.mask & s.guard()
    dens = 4.0 / (1 - np.abs(z[keep]) ** 2) ** 2
    return float(dens.sum() * s.dx * s.dy)


# ---------------------------------------------------------------------------
# Blaschke products


@dataclass(frozen=True)
class BlaschkeMap:
    """``rotation * prod (z - a) / (1 - conj(a) z)`` over ``zeros``."""

    zeros: tuple
    rotation: complex = 1.0
    _num: ComplexPoly = field(init=False, repr=False, compare=False)
    _den: ComplexPoly = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        zs = tuple(complex(a) for a in self.zeros)
        if not zs:
            raise ValidationError("a Blaschke product needs at least one zero")
        if any(abs(a) >= 1 for a in zs):
            raise ValidationError("zeros must lie in the open unit disk")
        rot = complex(self.rotation)
        if abs(abs(rot) - 1) > 1e-12:
            raise ValidationError("rotation must be unimodular")
        object.__setattr__(self, "zeros", zs)
        object.__setattr__(self, "rotation", rot)
        num = ComplexPoly.from_roots(zs) * ComplexPoly.constant(rot)
        den = ComplexPoly.constant(1.0)
        for a in zs:
            den = den * ComplexPoly((1.0, -a.conjugate()))
        object.__setattr__(self, "_num", num)
        object.__setattr__(self, "_den", den)

    @classmethod
    def random(cls, rng, d, with_zero_at_origin=False, radius=RANDOM_ZERO_RADIUS):
        n = d - 1 if with_zero_at_origin else d
        r = radius * np.sqrt(rng.random(n))
        th = 2 * math.pi * rng.random(n)
        zs = list(r * np.exp(1j * th))
        if with_zero_at_origin:
            zs = [0j] + zs
        rot = np.exp(2j * math.pi * rng.random())
        return cls(tuple(zs), complex(rot))

    @property
    def degree(self):
        return len(self.zeros)

    def __call__(self, z):
        z = np.asarray(z, complex)
        out = np.full(z.shape, self.rotation, complex)
        for a in self.zeros:
            out = out * (z - a) / (1 - a.conjugate() * z)
        return out

    def derivative(self, z):
        """``b'(z) = b(z) * sum (1 - |a|^2) / ((z - a)(1 - conj(a) z))``."""
        z = np.asarray(z, complex)
        num, den = self._num, self._den
        n, dn = num(z), num.derivative()(z)
        d, dd = den(z), den.derivative()(z)
        return (dn * d - n * dd) / (d * d)

    def critical_numerator(self):
        """``N' D - N D'``, degree at most ``2d - 2``."""
        num, den = self._num, self._den
        return num.derivative() * den - num * den.derivative()

    def preimages(self, w):
        """The ``d`` solutions of ``b(z) = w`` for ``|w| < 1``; ``w`` may be
        an array, giving one row of solutions per value."""
        w = np.asarray(w, complex)
        num = np.asarray(self._num.coeffs, complex)
        den = np.asarray(self._den.coeffs, complex)
        n = max(len(num), len(den))
        num = np.pad(num, (0, n - len(num)))
        den = np.pad(den, (0, n - len(den)))
        coeffs = num[None, :] - w.reshape(-1, 1) * den[None, :]
        out = _batch_roots(coeffs)
        return out[0] if w.ndim == 0 else out.reshape(w.shape + (n - 1,))


def _batch_roots(coeffs, polish=3):
    """Roots of many polynomials of one degree (rows, lowest order first):
    eigenvalues of the companion matrices, then Newton steps."""
    c = np.asarray(coeffs, complex)
    k, n = c.shape
    deg = n - 1
    comp = np.zeros((k, deg, deg), complex)
    comp[:, 0, :] = -c[:, -2::-1] / c[:, -1:]
    if deg > 1:
        comp[:, np.arange(1, deg), np.arange(deg - 1)] = 1.0
    z = np.linalg.eigvals(comp)
    dc = c[:, 1:] * np.arange(1, n)
    for _ in range(polish):
        v = np.zeros_like(z)
        dv = np.zeros_like(z)
        for j in range(deg, -1, -1):
            v = v * z + c[:, j:j + 1]
            if j < deg:
                dv = dv * z + dc[:, j:j + 1]
        step = np.where(np.abs(dv) > 1e-8 * (1 + np.abs(v)), v / np.where(dv == 0, 1, dv), 0)
        z = z - step
    return z


def critical_points(b):
    """The ``d - 1`` critical points in the disk, repeated by multiplicity."""
    d = b.degree
    if d == 1:
        return []
    num = b.critical_numerator()
    coeffs = np.asarray(num.coeffs, complex)
    # leading zeros at the origin (e.g. z^d) are split off exactly
    k0 = int(np.argmax(np.abs(coeffs) > 0))
    rs = [0j] * k0
    if len(coeffs) - k0 > 1:
        rs += list(_batch_roots(coeffs[None, k0:])[0])
    inside = sorted((complex(c) for c in rs if abs(c) < 1), key=lambda c: (abs(c), np.angle(c)))
    if len(inside) != d - 1:
        raise CountMismatch(f"found {len(inside)} critical points in the disk, expected {d - 1}")
    return inside


# ---------------------------------------------------------------------------
# preimages of disks


def preimage_mask(b, target, resolution, bounds=(-1.0, 1.0, -1.0, 1.0)):
    z = grid_centers(bounds, resolution)
    inside = np.abs(z) < 1
    m = np.zeros(z.shape, bool)
    m[inside] = target.contains(b(z[inside]))
    return HypSet(m, tuple(bounds))


def preimage_components(b, target, resolution=512):
    """4-connected components of ``{z : b(z) in target}`` on the disk grid."""
    full = preimage_mask(b, target, resolution)
    lab, n = ndimage.label(full.mask)
    return [HypSet(lab == i, full.bounds) for i in range(1, n + 1)]


def _level_points(b, r, n_theta):
    """Points with ``|b(z)| = r``: the ``d`` preimages of ``r e^(i theta)``."""
    th = 2 * math.pi * np.arange(n_theta) / n_theta
    return b.preimages(r * np.exp(1j * th)).ravel()


def _max_pair(z):
    """Largest pairwise hyperbolic distance within ``z``."""
    best = 0.0
    for lo in range(0, len(z), 512):
        pd = pseudo_distance(z[lo:lo + 512, None], z[None, :])
        best = max(best, float(pd.max()))
    return 2 * math.atanh(min(best, 1.0))


def diameter_bound(d, r):
    q = r ** (1.0 / d)
    return 2 * d * math.log((1 + q) / (1 - q))


def verify_diameter_bound(b, r, resolution=256, n_theta=1024, slack=1e-9):
    """Largest hyperbolic diameter of a component of ``b^-1(D(0, r))``.

    Components come from the raster; their boundaries are sampled exactly
    as the level set ``|b| = r`` (``d`` preimages of each boundary value),
    each point assigned to the nearest component pixel.  Returns
    ``(measured, bound, passed)``.
    """
    if not 0 < r < 1:
        raise ValidationError("need 0 < r < 1")
    target = HypDisk.from_euclidean_origin(r)
    full = preimage_mask(b, target, resolution)
    lab, n = ndimage.label(full.mask)
    pts = _level_points(b, r, n_theta)
    if n == 0:
        groups = [pts]
    else:
        _, (iy, ix) = ndimage.distance_transform_edt(lab == 0, return_indices=True)
        x0, x1, y0, y1 = full.bounds
        i = np.clip(((pts.real - x0) / full.dx).astype(int), 0, resolution - 1)
        j = np.clip(((pts.imag - y0) / full.dy).astype(int), 0, resolution - 1)
        owner = lab[iy[j, i], ix[j, i]]
        groups = [pts[owner == k] for k in range(1, n + 1)]
    measured = max((_max_pair(g) for g in groups if len(g)), default=0.0)
    bound = diameter_bound(b.degree, r)
    return measured, bound, measured <= bound + slack


def verify_critical_proximity(b, delta):
    """``(nearest, 32 d delta, passed)`` for ``b(0) = 0``, ``|b'(0)| <= delta^(d-1)``."""
    if abs(complex(b(0j))) > 1e-12:
        raise ValidationError("b must fix the origin")
    if not 0 < delta < 0.25:
        raise ValidationError("need 0 < delta < 1/4")
    d = b.degree
    if abs(complex(b.derivative(0j))) > delta ** (d - 1):
        raise PreconditionFail("|b'(0)| exceeds delta^(d-1)")
    crit = critical_points(b)
    nearest = min((hyp_distance(c, 0j) for c in crit), default=0.0)
    bound = 32 * d * delta
    return nearest, bound, nearest <= bound


def admissible_random(rng, d, delta):
    """Random ``b`` with ``b(0) = 0`` and ``|b'(0)| <= delta^(d-1)``: the
    other zeros are uniform in ``D(0, 0.95)`` and the first is pulled in
    just enough."""
    b = BlaschkeMap.random(rng, d, with_zero_at_origin=True)
    zs = list(b.zeros)
    if d > 1:
        prod = float(np.prod(np.abs(zs[1:])))
        if prod > delta ** (d - 1):
            zs[1] *= delta ** (d - 1) / prod * (1 - 1e-9)
    return BlaschkeMap(tuple(zs), b.rotation)


def _merge_boxes(boxes):
    boxes = [list(bx) for bx in boxes]
    merged = True
    while merged:
        merged = False
        for i in range(len(boxes)):
            for j in range(i + 1, len(boxes)):
                a, c = boxes[i], boxes[j]
                if a[0] <= c[1] and c[0] <= a[1] and a[2] <= c[3] and c[2] <= a[3]:
                    boxes[i] = [min(a[0], c[0]), max(a[1], c[1]), min(a[2], c[2]), max(a[3], c[3])]
                    del boxes[j]
                    merged = True
                    break
            if merged:
                break
    return [tuple(bx) for bx in boxes]


def preimage_area(b, target, resolution=256, max_rounds=12):
    """Poincare area of ``{z : b(z) in target}``.

    The set is rasterised on windows around the preimages of the target
    centre, grown until no window has member pixels on its edge.
    """
    ctr, rad = target.euclidean
    pre = b.preimages(target.center)
    dpre = np.abs(b.derivative(np.array(pre)))
    h = [4 * rad / max(float(g), 1e-300) for g in dpre]
    h = [max(x, 4 * math.sqrt(rad)) if g < 1e-3 else x for x, g in zip(h, dpre)]
    for _ in range(max_rounds):
        boxes = _merge_boxes([(z.real - hh, z.real + hh, z.imag - hh, z.imag + hh)
                              for z, hh in zip(pre, h)])
        boxes = [(max(x0, -1.0), min(x1, 1.0), max(y0, -1.0), min(y1, 1.0)) for x0, x1, y0, y1 in boxes]
        total, touching = 0.0, False
        for bx in boxes:
            s = preimage_mask(b, target, resolution, bx)
            m = s.mask
            x0, x1, y0, y1 = bx
            touching |= ((m[0].any() and y0 > -1) or (m[-1].any() and y1 < 1)
                         or (m[:, 0].any() and x0 > -1) or (m[:, -1].any() and x1 < 1))
            total += hyp_area(s)
        if not touching:
            return total
        h = [2 * x for x in h]
    return total


def verify_area_bound(b, target, resolution=256):
    """``(preimage area, C3 d^3 A^(1/d), passed)``."""
    A = hyp_area(target)
    d = b.degree
    if d * A ** (1.0 / (2 * d)) >= 0.125:
        raise HypothesisFail(f"d * A^(1/2d) = {d * A ** (1 / (2 * d)):.4g} is not < 1/8")
    area = preimage_area(b, target, resolution)
    bound = C3 * d ** 3 * A ** (1.0 / d)
    return area, bound, area <= bound


def sweep_area_target(d):
    """Target area used by the random sweeps: ``1e-6`` unless that breaks
    ``d A^(1/2d) < 1/8``."""
    return min(1e-6, 0.5 * (1.0 / (8 * d)) ** (2 * d))
