"""Dense complex polynomials, Aberth root finding and polynomial skew-products.

A :class:`ComplexPoly` stores coefficients lowest degree first.  A
:class:`CoeffFamily` is a polynomial in ``z`` whose coefficients are
polynomials in ``w``; together with a contraction ``lam`` it defines the
skew-product ``F(z, w) = (f(z, w), lam * w)``.

Maps are usually written as strings, e.g. ``"z^2 - 2 + (1+0.5i)*w"``;
see :func:`parse_map`.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import NonConvergence, ParseError, ValidationError

DEFAULT_TOL = 1e-12
DEFAULT_MAXITER = 500

# fixed irrational rotation of the Aberth starting circle
_START_ANGLE = 0.5 * (math.sqrt(5.0) - 1.0)


def _trim(coeffs):
    coeffs = [complex(c) for c in coeffs]
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    if not coeffs:
        coeffs = [0j]
    return tuple(coeffs)


@dataclass(frozen=True)
class ComplexPoly:
    """Polynomial ``sum(coeffs[j] * z**j)``.

    Trailing zero coefficients are trimmed on construction so that the
    leading coefficient is nonzero unless the polynomial vanishes.
    """

    coeffs: tuple

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _trim(self.coeffs))

    @classmethod
    def from_roots(cls, roots, leading=1.0):
        c = np.array([complex(leading)])
        for r in roots:
            c = np.convolve(c, [-complex(r), 1.0])
        return cls(tuple(c))

    @classmethod
    def constant(cls, c):
        return cls((complex(c),))

    @property
    def degree(self):
        if len(self.coeffs) == 1 and self.coeffs[0] == 0:
            return 0
        return len(self.coeffs) - 1

    @property
    def is_zero(self):
        return len(self.coeffs) == 1 and self.coeffs[0] == 0

    @property
    def leading(self):
        return self.coeffs[-1]

    @cached_property
    def array(self):
        return np.array(self.coeffs, dtype=complex)

    def __call__(self, z):
        return eval_poly(self, z)

    def derivative(self):
        return derivative(self)

    def __add__(self, other):
        other = _as_poly(other)
        n = max(len(self.coeffs), len(other.coeffs))
        a = np.zeros(n, complex)
        a[: len(self.coeffs)] += self.array
        a[: len(other.coeffs)] += other.array
        return ComplexPoly(tuple(a))

    __radd__ = __add__

    def __neg__(self):
        return ComplexPoly(tuple(-self.array))

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __rsub__(self, other):
        return _as_poly(other) - self

    def __mul__(self, other):
        other = _as_poly(other)
        return ComplexPoly(tuple(np.convolve(self.array, other.array)))

    __rmul__ = __mul__

    def compose(self, inner):
        """Return ``self(inner(z))``."""
        inner = _as_poly(inner)
        out = ComplexPoly.constant(0)
        for c in reversed(self.coeffs):
            out = out * inner + c
        return out

    def taylor(self, center):
        """Coefficients of ``self(center + t)`` in powers of ``t``."""
        c = list(self.coeffs)
        n = len(c)
        # repeated synthetic division (Horner shift)
        for i in range(n):
            for j in range(n - 2, i - 1, -1):
                c[j] += center * c[j + 1]
        return ComplexPoly(tuple(c))

    def monic(self):
        return ComplexPoly(tuple(self.array / self.leading))

    def __repr__(self):
        return f"ComplexPoly({format_poly(self)})"


def _as_poly(x):
    if isinstance(x, ComplexPoly):
        return x
    return ComplexPoly.constant(x)


def format_poly(poly, var="z"):
    out = ""
    for j, c in enumerate(poly.coeffs):
        if c == 0 and poly.degree > 0:
            continue
        c = complex(c)
        neg = out and c.imag == 0 and c.real < 0
        cs = _format_complex(-c if neg else c)
        term = cs if j == 0 else f"{cs}*{var}" if j == 1 else f"{cs}*{var}^{j}"
        out = term if not out else f"{out} {'-' if neg else '+'} {term}"
    return out or "0"


def _format_complex(c):
    c = complex(c)
    if c.imag == 0:
        return repr(c.real)
    if c.real == 0:
        return f"{c.imag!r}i"
    sign = "+" if c.imag >= 0 else "-"
    return f"({c.real!r}{sign}{abs(c.imag)!r}i)"


def eval_poly(poly, z):
    """Horner evaluation; works elementwise on numpy arrays."""
    coeffs = poly.coeffs
    acc = coeffs[-1] + 0 * z
    for c in coeffs[-2::-1]:
        acc = acc * z + c
    return acc


def eval_with_derivative(poly, z):
    """Return ``(poly(z), poly'(z))`` by a single Horner sweep."""
    coeffs = poly.coeffs
    p = coeffs[-1] + 0 * z
    dp = 0 * z
    for c in coeffs[-2::-1]:
        dp = dp * z + p
        p = p * z + c
    return p, dp


def derivative(poly):
    if poly.degree == 0:
        return ComplexPoly.constant(0)
    return ComplexPoly(tuple(j * c for j, c in enumerate(poly.coeffs) if j > 0))


def aberth(func, degree, radius, tol=DEFAULT_TOL, maxiter=DEFAULT_MAXITER,
           accept=None):
    """Simultaneous Aberth-Ehrlich iteration for ``degree`` roots of ``func``.

    ``func(z)`` must return ``(value, derivative)`` for an array ``z``.  The
    start configuration is ``degree`` equally spaced points on the circle of
    the given radius, rotated by a fixed irrational angle, so the result is
    deterministic.  ``accept(z, value)`` decides per root whether it is done;
    by default the correction must drop below ``tol * (1 + |z|)``.
    """
    k = np.arange(degree)
    z = radius * np.exp(1j * (2 * np.pi * k / degree + _START_ANGLE))
    if degree == 1:
        z = np.array([0j])
    done = np.zeros(degree, bool)
    for _ in range(maxiter):
        val, der = func(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = val / der
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, 1.0)
            inv = 1.0 / diff
            np.fill_diagonal(inv, 0.0)
            s = inv.sum(axis=1)
            step = ratio / (1.0 - ratio * s)
        bad = ~np.isfinite(step)
        # a zero derivative at an iterate: nudge instead of stalling
        step[bad] = 1e-3 * (1 + np.abs(z[bad]))
        step[val == 0] = 0
        small = np.abs(step) <= max(tol, 4e-16) * (1 + np.abs(z))
        if accept is not None:
            small = small | accept(z, val)
        z = np.where(done, z, z - step)
        done |= small
        if done.all():
            return z
    exc = NonConvergence(
        f"Aberth iteration did not converge in {maxiter} steps (degree {degree})")
    exc.last = z
    raise exc


def roots(poly, tol=DEFAULT_TOL, maxiter=DEFAULT_MAXITER):
    """All ``degree`` roots of ``poly`` with multiplicity.

    Each returned root satisfies ``|poly(r)| < tol * (1 + |r|)**degree``
    relative to the monic normalisation; otherwise :class:`NonConvergence`.
    """
    if poly.degree < 1:
        raise ValidationError("roots() needs a polynomial of degree >= 1")
    mp = poly.monic()
    deg = mp.degree
    if deg == 1:
        return np.array([-mp.coeffs[0]])
    radius = 1.0 + max(abs(c) for c in mp.coeffs[:-1])

    def func(z):
        return eval_with_derivative(mp, z)

    try:
        z = aberth(func, deg, radius, tol=tol, maxiter=maxiter)
    except NonConvergence as exc:
        z = exc.last
    resid = np.abs(eval_poly(mp, z))
    if not np.all(resid < tol * (1 + np.abs(z)) ** deg):
        raise NonConvergence(f"root residual too large: max {resid.max():.3e}")
    return z


def cluster_roots(zs, tol=DEFAULT_TOL):
    """Group roots closer than the clustering radius; returns ``[(mean, mult)]``.

    The radius is ``max(100*tol, 1e-5) * (1 + |z|)``: a k-fold root comes back
    from simultaneous iteration as a cluster of width about ``eps**(1/k)``.
    """
    zs = [complex(z) for z in zs]
    groups = []
    for z in zs:
        for g in groups:
            c = sum(g) / len(g)
            if abs(z - c) < max(100 * tol, 1e-5) * (1 + abs(c)):
                g.append(z)
                break
        else:
            groups.append([z])
    out = [(sum(g) / len(g), len(g)) for g in groups]
    out.sort(key=lambda t: (round(t[0].real, 9), round(t[0].imag, 9)))
    return out


# ---------------------------------------------------------------------------
# two-variable families and skew-products


@dataclass(frozen=True)
class CoeffFamily:
    """``f(z, w) = sum_j coeff_polys[j](w) * z**j``, monic of degree ``z_degree`` in z."""

    coeff_polys: tuple
    z_degree: int

    def __post_init__(self):
        polys = tuple(_as_poly(p) for p in self.coeff_polys)
        object.__setattr__(self, "coeff_polys", polys)
        d = self.z_degree
        if d < 2:
            raise ValidationError(f"z-degree must be >= 2, got {d}")
        if len(polys) != d + 1 or polys[d].coeffs != (1 + 0j,):
            raise ValidationError("family must be monic in z (z^d coefficient = 1)")

    @classmethod
    def from_terms(cls, terms):
        """Build from ``{(j, k): c}`` meaning ``c * z**j * w**k``."""
        terms = {jk: complex(c) for jk, c in terms.items() if c != 0}
        if not terms:
            raise ValidationError("map is identically zero")
        d = max(j for j, _ in terms)
        polys = []
        for j in range(d + 1):
            kmax = max([k for (jj, k) in terms if jj == j], default=0)
            polys.append(ComplexPoly(tuple(terms.get((j, k), 0) for k in range(kmax + 1))))
        return cls(tuple(polys), d)

    @cached_property
    def table(self):
        """Coefficient array ``c[j, k]`` of ``z**j * w**k``."""
        kmax = max(len(p.coeffs) for p in self.coeff_polys)
        a = np.zeros((self.z_degree + 1, kmax), complex)
        for j, p in enumerate(self.coeff_polys):
            a[j, : len(p.coeffs)] = p.coeffs
        return a

    @property
    def depends_on_w(self):
        return self.table.shape[1] > 1 and np.any(self.table[:, 1:] != 0)

    def base(self):
        return eval_fiber(self, 0)

    def dz(self):
        """Coefficients (as a list of w-polynomials) of the z-derivative."""
        return [j * p for j, p in enumerate(self.coeff_polys)][1:]

    def __call__(self, z, w):
        return eval_family(self, z, w)

    def __str__(self):
        parts = []
        for (j, k), c in sorted(np.ndenumerate(self.table), reverse=True):
            if c == 0:
                continue
            mono = "*".join(x for x in (
                "" if j == 0 else ("z" if j == 1 else f"z^{j}"),
                "" if k == 0 else ("w" if k == 1 else f"w^{k}")) if x)
            neg = c.imag == 0 and c.real < 0
            cs = _format_complex(-c if neg else c)
            if mono and c in (1, -1):
                body = mono
            else:
                body = f"{cs}*{mono}" if mono else cs
            parts.append(("- " if neg else "+ ") + body)
        out = " ".join(parts)
        return out[2:] if out.startswith("+ ") else "-" + out[2:]


def eval_fiber(fam, w):
    """The fiber polynomial ``z -> f(z, w)`` (monic of degree d)."""
    return ComplexPoly(tuple(eval_poly(p, w) for p in fam.coeff_polys))


def eval_family(fam, z, w):
    """Evaluate ``f(z, w)`` elementwise (Horner in z over Horner in w)."""
    polys = fam.coeff_polys
    acc = eval_poly(polys[-1], w) + 0 * z
    for p in polys[-2::-1]:
        acc = acc * z + eval_poly(p, w)
    return acc


def eval_family_dz(fam, z, w):
    acc = 0 * z + 0 * w
    d = fam.z_degree
    for j in range(d, 0, -1):
        acc = acc * z + j * eval_poly(fam.coeff_polys[j], w)
    return acc


def eval_family_dw(fam, z, w):
    acc = 0 * z + 0 * w
    for p in fam.coeff_polys[::-1]:
        acc = acc * z + eval_poly(derivative(p), w)
    return acc


@dataclass(frozen=True)
class SkewProduct:
    """``F(z, w) = (f(z, w), lam * w)`` with ``0 < |lam| < 1``."""

    f: CoeffFamily
    lam: complex
    source: str = ""

    def __post_init__(self):
        lam = complex(self.lam)
        object.__setattr__(self, "lam", lam)
        if not 0 < abs(lam) < 1:
            raise ValidationError(f"need 0 < |lambda| < 1, got {lam}")

    @classmethod
    def parse(cls, map_string, lam):
        if isinstance(lam, str):
            lam = parse_complex(lam)
        return cls(parse_map(map_string), lam, source=map_string)

    @cached_property
    def p(self):
        return self.f.base()

    def __call__(self, point):
        return apply(self, point)


def apply(F, point):
    """One step ``(z, w) -> (f(z, w), lam*w)``; the fiber polynomial is
    evaluated exactly as :func:`eval_fiber` would, so on ``w = 0`` iterating
    ``apply`` reproduces iterating ``F.p`` bit for bit."""
    z, w = point
    if np.isscalar(w) and np.isscalar(z):
        return eval_poly(eval_fiber(F.f, w), z), F.lam * w
    return eval_family(F.f, z, w), F.lam * w


def iterate(F, point, n):
    for _ in range(n):
        point = apply(F, point)
    return point


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|(.))")


def _tokenize(text):
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            break
        if m.group(1) is not None:
            toks.append(("num", m.group(1), m.start(1)))
        elif m.group(2) is not None:
            toks.append(("sym", m.group(2), m.start(2)))
        pos = m.end()
    toks.append(("end", "", len(text)))
    return toks


class _Parser:
    """Recursive descent over sums of products; values are ``{(j, k): c}``."""

    def __init__(self, text, variables):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.variables = variables

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def fail(self, msg, tok=None):
        tok = tok or self.peek()
        raise ParseError(msg, self.text, tok[2])

    def parse(self):
        if self.peek()[0] == "end":
            self.fail("empty expression")
        val = self.expr()
        if self.peek()[0] != "end":
            self.fail(f"unexpected {self.peek()[1]!r}")
        return val

    def expr(self):
        sign = 1
        if self.peek()[1] in "+-" and self.peek()[0] == "sym":
            sign = -1 if self.take()[1] == "-" else 1
        acc = _scale(self.term(), sign)
        while self.peek()[0] == "sym" and self.peek()[1] in "+-":
            op = self.take()[1]
            t = self.term()
            acc = _add(acc, _scale(t, -1 if op == "-" else 1))
        return acc

    def term(self):
        acc = self.power()
        while True:
            tok = self.peek()
            if tok[0] == "sym" and tok[1] == "*":
                self.take()
                acc = _mul(acc, self.power())
            elif tok[0] == "sym" and tok[1] == "/":
                self.take()
                den = self.power()
                if set(den) - {(0, 0)} or den.get((0, 0), 0) == 0:
                    self.fail("division only by a nonzero constant", tok)
                acc = _scale(acc, 1 / den[(0, 0)])
            elif tok[0] == "num" or (tok[0] == "sym" and (tok[1] in "(" or tok[1] in self.variables or tok[1] == "i")):
                acc = _mul(acc, self.power())
            else:
                return acc

    def power(self):
        base = self.atom()
        if self.peek()[0] == "sym" and self.peek()[1] == "^":
            self.take()
            tok = self.peek()
            if tok[0] != "num" or not tok[1].isdigit():
                self.fail("expected integer exponent")
            self.take()
            e = int(tok[1])
            out = {(0, 0): 1 + 0j}
            for _ in range(e):
                out = _mul(out, base)
            return out
        return base

    def atom(self):
        tok = self.take()
        kind, s, _ = tok
        if kind == "num":
            val = float(s)
            if self.peek() == ("sym", "i", self.peek()[2]):
                self.take()
                return {(0, 0): 1j * val}
            return {(0, 0): complex(val)}
        if kind == "sym":
            if s == "(":
                inner = self.expr()
                if self.peek()[1] != ")":
                    self.fail("expected ')'")
                self.take()
                return inner
            if s == "i":
                return {(0, 0): 1j}
            if s in "+-":
                # unary sign, e.g. "z + -2" or "2*-z"
                return _scale(self.power(), -1 if s == "-" else 1)
            if s in self.variables:
                return {self.variables[s]: 1 + 0j}
        self.fail(f"unexpected {s!r}" if s else "unexpected end of input", tok)


def _add(a, b):
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, 0) + v
    return out


def _scale(a, s):
    return {k: v * s for k, v in a.items()}


def _mul(a, b):
    out = {}
    for (j1, k1), v1 in a.items():
        for (j2, k2), v2 in b.items():
            key = (j1 + j2, k1 + k2)
            out[key] = out.get(key, 0) + v1 * v2
    return out


def parse_terms(text):
    """Parse ``text`` into ``{(j, k): c}`` for monomials ``c z^j w^k``."""
    return _Parser(text, {"z": (1, 0), "w": (0, 1)}).parse()


def parse_map(text):
    """Parse a skew-product first coordinate such as ``"z^2 - 2 + w"``."""
    return CoeffFamily.from_terms(parse_terms(text))


def parse_poly(text, var="z"):
    """Parse a one-variable polynomial."""
    terms = _Parser(text, {var: (1, 0)}).parse()
    d = max(j for j, _ in terms)
    return ComplexPoly(tuple(terms.get((j, 0), 0) for j in range(d + 1)))


def parse_complex(text):
    """Parse a complex constant such as ``"0.25"``, ``"1/4"`` or ``"1+0.5i"``."""
    if isinstance(text, (int, float, complex)):
        return complex(text)
    terms = _Parser(str(text), {}).parse()
    return complex(terms.get((0, 0), 0))
