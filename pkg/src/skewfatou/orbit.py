"""Orbits of ``F`` that start extremely close to a critical orbit.

A point is stored as ``(P_j + d * 2**e, wm * 2**ew)`` where ``P_j`` is a
reference orbit of ``p`` (the critical point, its preimages of the landing
cycle, then the cycle repeated).  ``d`` and ``wm`` are complex mantissas
and ``e``, ``ew`` integer exponents per orbit.  Plain floats would lose the
offset entirely: ``-2 + 1e-17`` rounds to ``-2``, and ``lam**s * w`` leaves
the double range for ``s`` in the low thousands.

The step uses the exact identity
``f(P + d, w) - p(P) = sum_k c_k(P) d**k + h(P + d, w)`` with ``c_k`` the
Taylor coefficients of ``p`` at ``P`` and ``h = f - p`` the w-dependent part.
"""
from __future__ import annotations

import math

import numpy as np

from .poly import ComplexPoly, eval_poly

ZERO_EXP = -(10 ** 6)  # exponent used for a vanishing mantissa


def normalize(m, e, cap=0):
    """Renormalise mantissa ``m`` (complex array) and exponent ``e`` so that
    ``max(|Re m|, |Im m|)`` lies in ``[0.5, 1)``; exponents never exceed
    ``cap`` (then ``m`` just holds the plain value)."""
    m = np.asarray(m, complex)
    e = np.asarray(e, np.int64)
    mag = np.maximum(np.abs(m.real), np.abs(m.imag))
    zero = mag == 0
    _, ex = np.frexp(np.where(zero, 1.0, mag))
    ne = e + ex.astype(np.int64)
    if cap is not None:
        ne = np.minimum(ne, cap)
    ne = np.where(zero, ZERO_EXP, ne)
    shift = np.where(zero, 0, e - ne)
    mm = np.ldexp(m.real, shift) + 1j * np.ldexp(m.imag, shift)
    return mm, ne


def to_complex(m, e):
    """Plain value ``m * 2**e`` (underflows quietly to 0)."""
    m = np.asarray(m, complex)
    e = np.clip(np.asarray(e, np.int64), -4000, 4000)
    return np.ldexp(m.real, e) + 1j * np.ldexp(m.imag, e)


def scaled(x):
    """Mantissa/exponent form of plain complex values."""
    x = np.asarray(x, complex)
    return normalize(x, np.zeros(x.shape, np.int64), cap=None)


def mul(a, b):
    (ma, ea), (mb, eb) = a, b
    return normalize(ma * mb, ea + eb, cap=None)


def power(base, s):
    """``base**s`` for integer array ``s >= 0`` by binary powering in
    mantissa/exponent form (relative error about ``log2(s)`` ulps)."""
    s = np.asarray(s, np.int64)
    res = normalize(np.ones(s.shape, complex), np.zeros(s.shape, np.int64), cap=None)
    bm, be = scaled(complex(base))
    bm = np.full(s.shape, bm, complex)
    be = np.full(s.shape, be, np.int64)
    k = s.copy()
    while np.any(k > 0):
        odd = (k & 1) == 1
        rm, re_ = mul(res, (bm, be))
        res = (np.where(odd, rm, res[0]), np.where(odd, re_, res[1]))
        bm, be = mul((bm, be), (bm, be))
        k >>= 1
    return res


def add_scaled(a, b):
    """Sum of two mantissa/exponent numbers."""
    (ma, ea), (mb, eb) = a, b
    E = np.maximum(np.where(ma == 0, ZERO_EXP, ea), np.where(mb == 0, ZERO_EXP, eb))
    sa = np.clip(ea - E, -2000, 0)
    sb = np.clip(eb - E, -2000, 0)
    m = (np.ldexp(ma.real, sa) + 1j * np.ldexp(ma.imag, sa)
         + np.ldexp(mb.real, sb) + 1j * np.ldexp(mb.imag, sb))
    return normalize(m, E, cap=None)


def log2abs(m, e):
    with np.errstate(divide="ignore"):
        return np.log2(np.abs(m)) + e


class ReferenceOrbit:
    """``x0, p(x0), ..., p^r(x0) = cycle[0]``, then the cycle repeated."""

    def __init__(self, p, x0, preperiod, cycle_points):
        self.p = p
        self.r = int(preperiod)
        self.cycle = tuple(complex(c) for c in cycle_points)
        pre = [complex(x0)]
        for _ in range(self.r - 1):
            pre.append(complex(eval_poly(p, pre[-1])))
        self.pre = tuple(pre[: self.r])
        self.q = len(self.cycle)
        pts = list(self.pre) + list(self.cycle)
        self._taylor = [np.array(p.taylor(c).coeffs[1:], complex) for c in pts]

    def index(self, j):
        return j if j < self.r else self.r + (j - self.r) % self.q

    def point(self, j):
        i = self.index(j)
        return self.pre[i] if i < self.r else self.cycle[i - self.r]

    def taylor(self, j):
        return self._taylor[self.index(j)]


class PerturbedOrbits:
    """A batch of orbits of ``F`` near a reference orbit, all at the same step."""

    def __init__(self, F, ref, d, e, wm, ew, region=None, freeze=True):
        self.F = F
        self.ref = ref
        self.d, self.e = normalize(d, e)
        self.wm, self.ew = normalize(wm, ew, cap=None)
        self.j = 0
        self.region = region
        self.freeze = freeze and region is not None and region.eps is not None
        self.frozen = np.zeros(self.d.shape, bool)
        self.zf = np.zeros(self.d.shape, complex)
        # h(z, w) = sum_k H_k(z) w^k over k >= 1
        tab = F.f.table
        self._H = [ComplexPoly(tuple(tab[:, k])) for k in range(1, tab.shape[1])]

    @classmethod
    def start(cls, F, ref, delta, w, **kw):
        """``delta`` and ``w`` are ``(mantissa, exponent)`` pairs."""
        return cls(F, ref, delta[0], delta[1], w[0], w[1], **kw)

    @property
    def z(self):
        live = self.ref.point(self.j) + to_complex(self.d, self.e)
        return np.where(self.frozen, self.zf, live)

    @property
    def w(self):
        return to_complex(self.wm, self.ew)

    @property
    def delta(self):
        return self.d, self.e

    def in_W(self):
        reg = self.region
        return reg.in_W0(self.z) & (log2abs(self.wm, self.ew) < math.log2(reg.eps))

    def step(self):
        P = self.ref.point(self.j)
        c = self.ref.taylor(self.j)
        act = ~self.frozen
        d, e = self.d[act], self.e[act]
        wm, ew = self.wm[act], self.ew[act]
        # polynomial part, scaled by 2**-e
        acc = np.zeros(d.shape, complex)
        dk = np.ones(d.shape, complex)
        for k, ck in enumerate(c, start=1):
            dk = dk * d
            if ck != 0:
                sh = np.clip((k - 1) * e, -4000, 0)
                acc = acc + ck * (np.ldexp(dk.real, sh) + 1j * np.ldexp(dk.imag, sh))
        # w-dependent part, scaled by 2**-ew
        hacc = np.zeros(d.shape, complex)
        if self._H:
            z = P + to_complex(d, e)
            wk = np.ones(d.shape, complex)
            for k, Hk in enumerate(self._H, start=1):
                wk = wk * wm
                if Hk.is_zero:
                    continue
                sh = np.clip((k - 1) * ew, -4000, 0)
                hacc = hacc + eval_poly(Hk, z) * (np.ldexp(wk.real, sh) + 1j * np.ldexp(wk.imag, sh))
        nd, ne = add_scaled(normalize(acc, e, cap=None), normalize(hacc, ew, cap=None))
        nd, ne = normalize(nd, ne)  # cap exponent at 0
        self.d[act], self.e[act] = nd, ne
        self.wm[act], self.ew[act] = normalize(self.F.lam * wm, ew, cap=None)
        self.j += 1
        if self.freeze:
            new = self.in_W() & ~self.frozen
            self.zf[new] = self.z[new]
            self.frozen |= new

    def run(self, n):
        for _ in range(n):
            self.step()
        return self

    def copy(self):
        other = object.__new__(PerturbedOrbits)
        other.__dict__.update(self.__dict__)
        for name in ("d", "e", "wm", "ew", "frozen", "zf"):
            setattr(other, name, getattr(self, name).copy())
        return other
