"""Three ways to solve a box-constrained quadratic program.

Run: python3 demos/02_box_qp.py
"""
import numpy as np

from koitervi import (random_box_qp, solve_box_qp_enumerate, solve_box_qp_pdas,
                      solve_box_qp_psor)

rng = np.random.default_rng(0)
qp = random_box_qp(rng, 150)
a = solve_box_qp_pdas(qp, tol=1e-11)
b = solve_box_qp_psor(qp, tol=1e-11)
print(f"PDAS: {a.iterations} iterations, {len(a.active_set)} active, KKT {a.kkt_residual:.1e}")
print(f"PSOR: {b.iterations} sweeps, max |difference| {np.abs(a.u - b.u).max():.1e}")

# Tiny problems can be solved by trying every active set.
small = random_box_qp(rng, 4, bounded_fraction=1.0)
e = solve_box_qp_enumerate(small)
print("enumeration active set", e.active_set.tolist(),
      "PDAS active set", solve_box_qp_pdas(small).active_set.tolist())
