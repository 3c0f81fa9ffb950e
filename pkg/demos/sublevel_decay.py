"""Sublevel areas of z^2 - 2 shrink geometrically; those of the
parabolic map z + z^2 do not.

Run: python demos/sublevel_decay.py [resolution]
"""
import sys

from skewfatou.dynamics import region_from_polynomial
from skewfatou.errors import DegenerateFit
from skewfatou.poly import parse_poly
from skewfatou.sublevel import area_table, box_dimension, fit_decay, rasterize

# below about 2048 pixels the thin sets V_m of z^2 - 2 empty out early
res = int(sys.argv[1]) if len(sys.argv) > 1 else 2048

for text in ("z^2-2", "z+z^2"):
    p = parse_poly(text)
    ras = rasterize(p, region_from_polynomial(p), resolution=res, cap=60)
    tab = area_table(ras, range(0, 31))
    try:
        fit = fit_decay(tab, 5, 25)
        print(f"{text}: area(V_m) ~ {fit.C:.3g} * {fit.rate:.3f}^m  (r2 {fit.r2:.3f})")
    except DegenerateFit as e:
        print(f"{text}: no fit at this resolution ({e})")
    for m, a, n in tab[::5]:
        print(f"   m={m:2d}  area={a:.5f}  pixels={n}")
    print(f"   box dimension of the Julia proxy: {box_dimension(ras):.3f}")
