"""Regularity toolkit: feasible perturbations, a convexifier and a probe.

Run from the repository root: python3 demos/06_regularity.py
"""
import sys

import numpy as np

sys.path.insert(0, "tests")
from generators import concave_gap_instance  # noqa: E402

from koitervi import (Chart, LameConstants, build_convexifier, build_mesh,  # noqa: E402
                      feasible_perturbation, interior_regularity_probe, solve_membrane_limit)

rng = np.random.default_rng(1)
worst = np.inf
for _ in range(200):
    eta, s, phi, rho, h, coeff = concave_gap_instance(rng)
    out = feasible_perturbation(eta, s, phi, rho, h, coeff)
    worst = min(worst, float(np.min(out.values + s.values)))
print(f"200 perturbations of obstacle-touching fields: min(s + eta) = {worst:.2e}")

cv = build_convexifier("2 + sin(y1)", (0.25, 0.0))
print(f"convexifier for 2 + sin(y1): r={cv.r:g}, B={cv.B:g}, min eigenvalue {cv.min_eig:.3e}")

chart = Chart.sphere(1.0, 0.5)
sol = solve_membrane_limit(chart, build_mesh(chart, 64), LameConstants(1.0, 1.0), "1000",
                           ("y1", "cos(y2)", "1 + y1*y2"))
table = interior_regularity_probe(sol, ((0.0, 0.0), 0.25))
for h, rho, a, b in table.rows:
    print(f"  h={h:.5f} rho={rho}: |D u_tan|_H1 {a:.4f}  |D u_3|_L2 {b:.4f}")
print("max/min ratios", {k: round(v, 3) for k, v in table.ratios.items()})
