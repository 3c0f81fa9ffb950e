"""Critical orbits of the skew product (z^2 - 2 + w, w/4).

The critical point 0 of z^2 - 2 lands on the repelling fixed point 2
(multiplier 4), and 4 * 1/4 = 1, so the fiberwise linearization sends the
critical branch into the basin of infinity.  We count the critical
orbits that are neither escaping nor near the postcritical set.
"""
import math

from skewfatou.dynamics import build_escape_region, certify_subhyperbolic, escape_time
from skewfatou.linearization import detect_branch, detect_order_k, phi_sequence, phi_values
from skewfatou.poly import SkewProduct
from skewfatou.tracker import count_non_escaped, postcritical_disks, resonant_grid

F = SkewProduct.parse("z^2-2+w", "1/4")
cert = certify_subhyperbolic(F.p)
for rec in cert.critical_records:
    print("critical record:", rec.as_dict())

region = build_escape_region(F.p, cert, F)
br = detect_branch(F, cert, eps=0.1)
br = br.with_k(detect_order_k(br, F))
print(f"branch: l={br.l} k={br.k} mu={br.mu:.6g} nu={br.nu:.6g}")

for st in phi_sequence(br, F, [10, 15, 20, 25]):
    print(f"Phi_{st.n}: Cauchy gap {st.cauchy_gap:.3e}")

w0 = 0.05 + 0.05j
z, _ = phi_values(br, 30, [w0])
print(f"Phi(w0) = {complex(z[0]):.6g}, escapes after {escape_time(F.p, region, complex(z[0]))} steps")

res = count_non_escaped(F, br, region, w0, postcritical_disks(cert), 400, cert=cert)
peak = max(c for _, c in res.counts)
print(f"#S_n for n <= 400: max {peak}, max ratio to log(n+2) {max(res.ratio_to_log()):.3f}")

g = resonant_grid(F, br, w0, 40, 20, region)
print("table identity exact:", g.identity_holds())
print("limits a_m for m = -2..2:",
      ", ".join(f"{g.entry(40, m).real:+.6f}" for m in range(-2, 3)))
print(f"(log n bound reference: log(402) = {math.log(402):.3f})")
