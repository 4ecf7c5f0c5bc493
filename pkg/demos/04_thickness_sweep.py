"""Koiter solutions approach the membrane limit as the thickness shrinks.

Run from the repository root: python3 demos/04_thickness_sweep.py
"""
import sys

sys.path.insert(0, "tests")
from manufactured import LOAD  # noqa: E402

from koitervi import Chart, LameConstants, build_mesh, epsilon_sweep  # noqa: E402

chart = Chart.sphere(1.0, 0.5)
mesh = build_mesh(chart, 16)
eps = [0.2, 0.1, 0.05, 0.025, 0.0125]

for label, gap, load in (("clamp-compatible load, no contact", "1000", LOAD),
                         ("uniform pressure, contact", "0.01", ("0", "0", "-5"))):
    rep = epsilon_sweep(chart, mesh, LameConstants(1.0, 1.0), gap, load, eps)
    print(label)
    for e, err, n in zip(rep.epsilons, rep.err_vm, rep.active_counts):
        print(f"  eps {e:<7g} error {err:.5f}  active {n}")
# The second sweep flattens out: the membrane limit keeps eta3 = -gap on the
# boundary while the Koiter solution is clamped to zero there.
