"""Rasters of escape times, areas of the sublevel complements ``V_m``,
exponential decay fits and box-counting dimension of the Julia set."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .dynamics import NOT_ESCAPED, box_meets_julia, escape_time_array
from .errors import DegenerateFit, EmptyJuliaSample, ValidationError

DEFAULT_RASTER_CAP = 60
BLOCK_ROWS = 128


@dataclass(frozen=True, eq=False)
class GridRaster:
    """Escape times at pixel centres.

    ``values[j, i]`` belongs to the point
    ``re_min + (i + 0.5) * dx + 1j * (im_min + (j + 0.5) * dy)``.
    """

    bounds: tuple
    resolution: int
    values: np.ndarray
    cap: int = DEFAULT_RASTER_CAP
    near_julia: np.ndarray | None = None

    @property
    def dx(self):
        return (self.bounds[1] - self.bounds[0]) / self.resolution

    @property
    def dy(self):
        return (self.bounds[3] - self.bounds[2]) / self.resolution

    @property
    def pixel_area(self):
        return self.dx * self.dy

    @property
    def not_escaped(self):
        return self.values == NOT_ESCAPED

    def centers(self, rows=slice(None)):
        return pixel_centers(self.bounds, self.resolution, rows)

    def __eq__(self, other):
        return (isinstance(other, GridRaster) and tuple(self.bounds) == tuple(other.bounds)
                and self.resolution == other.resolution and self.cap == other.cap
                and np.array_equal(self.values, other.values))


def default_bounds(R):
    h = float(R) + 0.5
    return (-h, h, -h, h)


def pixel_centers(bounds, resolution, rows=slice(None)):
    re0, re1, im0, im1 = bounds
    dx = (re1 - re0) / resolution
    dy = (im1 - im0) / resolution
    x = re0 + (np.arange(resolution) + 0.5) * dx
    y = im0 + (np.arange(resolution)[rows] + 0.5) * dy
    return x[None, :] + 1j * y[:, None]


def rasterize(p, region, bounds=None, resolution=512, cap=DEFAULT_RASTER_CAP, threads=None,
              julia=True):
    """Escape time of every pixel centre (``NOT_ESCAPED`` after ``cap`` steps).

    With ``julia=True`` the raster also carries ``near_julia``, the pixels
    whose square may meet the Julia set (see :func:`box_meets_julia`).
    Row blocks are independent; ``threads > 1`` evaluates them on a pool.
    The result does not depend on the thread count.
    """
    if resolution < 64:
        raise ValidationError("resolution must be >= 64")
    bounds = default_bounds(region.R) if bounds is None else tuple(float(b) for b in bounds)
    out = np.empty((resolution, resolution), dtype=np.uint32)
    near = np.empty((resolution, resolution), dtype=bool) if julia else None
    # half diagonal of a pixel
    rho = 0.5 * math.hypot((bounds[1] - bounds[0]) / resolution, (bounds[3] - bounds[2]) / resolution)
    blocks = [slice(a, min(a + BLOCK_ROWS, resolution)) for a in range(0, resolution, BLOCK_ROWS)]

    def work(rows):
        z = pixel_centers(bounds, resolution, rows)
        out[rows] = escape_time_array(p, region, z, cap)
        if julia:
            near[rows] = box_meets_julia(p, region, z, rho, cap)

    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(work, blocks))
    else:
        for rows in blocks:
            work(rows)
    return GridRaster(bounds, resolution, out, cap, near)


def pixel_count_Vm(raster, m):
    # NOT_ESCAPED is the largest uint32, so it counts as > m automatically
    return int(np.count_nonzero(raster.values > m))


def area_of_Vm(raster, m):
    """Area of ``V_m``: pixels whose escape time exceeds ``m`` (or never escape)."""
    if m > raster.cap:
        raise ValidationError(f"m = {m} exceeds the raster cap {raster.cap}")
    return pixel_count_Vm(raster, m) * raster.pixel_area


def area_table(raster, ms):
    """``[(m, area, pixel_count)]``."""
    return [(m, pixel_count_Vm(raster, m) * raster.pixel_area, pixel_count_Vm(raster, m)) for m in ms]


@dataclass(frozen=True)
class DecayFit:
    areas: tuple
    rate: float
    C: float
    r2: float

    @property
    def slope(self):
        return math.log(self.rate)


def fit_decay(areas, m_min=0, m_max=None):
    """Least-squares fit of ``log area = log C + m log rate`` over positive samples."""
    pts = [(m, a) for m, a, *_ in areas if m >= m_min and (m_max is None or m <= m_max) and a > 0]
    if len(pts) < 5:
        raise DegenerateFit(f"need 5 positive-area samples, got {len(pts)}")
    m = np.array([t[0] for t in pts], float)
    y = np.log([t[1] for t in pts])
    A = np.vstack([m, np.ones_like(m)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * m + icpt)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss if ss > 0 else 1.0
    return DecayFit(tuple(pts), float(math.exp(slope)), float(math.exp(icpt)), float(r2))


# ---------------------------------------------------------------------------
# Julia set proxy


def julia_proxy(raster):
    """Boolean mask standing in for the Julia set.

    Pixels that never escape, together with the pixels whose square may meet
    the Julia set when the raster carries that information.  With pixel
    centre sampling a Julia set of measure zero is almost never hit exactly,
    so the second part is what makes the proxy connected.
    """
    mask = raster.not_escaped
    if raster.near_julia is not None:
        mask = mask | raster.near_julia
    return mask


def box_counts(mask, scales):
    n = mask.shape[0]
    out = []
    for s in scales:
        if n % s:
            raise ValidationError(f"box size {s} does not divide {n}")
        b = mask.reshape(n // s, s, n // s, s).any(axis=(1, 3))
        out.append(int(np.count_nonzero(b)))
    return out


def default_scales(resolution):
    """Box sizes (pixels) from resolution/512 (at least 2) up to resolution/16."""
    lo = max(2, resolution // 512)
    scales = []
    s = lo
    while s <= resolution // 16:
        scales.append(s)
        s *= 2
    return scales


def box_dimension(raster, scales=None, mask=None):
    """Slope of ``log N(eps)`` against ``log(1/eps)`` over power-of-two box sizes."""
    mask = julia_proxy(raster) if mask is None else mask
    if not mask.any():
        raise EmptyJuliaSample("no Julia-set pixels in the raster")
    scales = default_scales(raster.resolution) if scales is None else list(scales)
    for s in scales:
        if s & (s - 1):
            raise ValidationError(f"box size {s} is not a power of two")
    counts = box_counts(mask, scales)
    x = np.log(1.0 / np.array(scales, float))
    y = np.log(counts)
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def distance_to_set(raster, mask):
    """Euclidean distance (in plane units) from every pixel centre to the
    nearest pixel centre of ``mask``."""
    if not mask.any():
        raise EmptyJuliaSample("no Julia-set pixels in the raster")
    return ndimage.distance_transform_edt(~mask, sampling=(raster.dy, raster.dx))


def neighborhood_area(raster, delta, mask=None):
    """Area of the pixels within ``delta`` of the Julia-set proxy."""
    if delta < 2 * max(raster.dx, raster.dy) - 1e-12:
        raise ValidationError("delta must be at least two pixel widths")
    mask = julia_proxy(raster) if mask is None else mask
    dist = distance_to_set(raster, mask)
    return float(np.count_nonzero(dist <= delta)) * raster.pixel_area


def containment_profile(raster, ms, mask=None):
    """``[(m, sup distance from V_m to the Julia proxy)]``."""
    mask = julia_proxy(raster) if mask is None else mask
    dist = distance_to_set(raster, mask)
    out = []
    for m in ms:
        vm = raster.values > m
        out.append((m, float(dist[vm].max()) if vm.any() else 0.0))
    return out


def fit_containment(profile, m0):
    """Fit ``sup dist(V_m, J) <= c * theta**(m - m0)`` on the positive part of
    a :func:`containment_profile`; returns ``(c, theta)`` with ``c`` raised so
    that every sample satisfies the bound."""
    pts = [(m, d) for m, d in profile if m >= m0 and d > 0]
    if len(pts) < 3:
        raise DegenerateFit("need 3 positive samples for the containment fit")
    m = np.array([t[0] for t in pts], float) - m0
    y = np.log([t[1] for t in pts])
    slope, icpt = np.polyfit(m, y, 1)
    theta = math.exp(slope)
    c = math.exp(np.max(y - slope * m))
    return c, theta
