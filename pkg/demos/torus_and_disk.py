"""Orbit closures on the torus C / (2 pi i Z + log(mu) Z) and the
hyperbolic disk bounds for Blaschke products."""
import math

import numpy as np

from skewfatou.hyperbolic import BlaschkeMap, admissible_random, verify_critical_proximity, verify_diameter_bound
from skewfatou.torus import TorusLattice, TorusPoint, embed, gap_series, orbit_closure

lat = TorusLattice.from_mu(4)
for label, y in [("resonant nu = 1/4", embed(lat, 0.25)),
                 ("real nu = 0.3", embed(lat, 0.3)),
                 ("generic", TorusPoint.from_coords(lat, (math.sqrt(5) - 1) / 2, math.sqrt(2) - 1))]:
    print(f"{label:>18}: closure {orbit_closure(lat, y)}")

y = TorusPoint.from_coords(lat, (math.sqrt(5) - 1) / 2, math.sqrt(2) - 1)
for n, gap in gap_series(lat, y, [(0, 0.5, 0, 0.5)], [10 ** 2, 10 ** 3, 10 ** 4, 10 ** 5]):
    print(f"   n={n:>6}: equidistribution gap {gap:.2e}")

rng = np.random.default_rng(7)
for d in (2, 3, 4):
    b = BlaschkeMap.random(rng, d)
    m, bound, ok = verify_diameter_bound(b, 0.5)
    print(f"degree {d}: preimage diameter {m:.3f} <= {bound:.3f}: {ok}")
    a = admissible_random(rng, d, 0.1)
    near, bd, ok = verify_critical_proximity(a, 0.1)
    print(f"          nearest critical point {near:.3f} <= {bd:.3f}: {ok}")
