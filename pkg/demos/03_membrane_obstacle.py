"""Membrane limit of a pressed spherical cap touching a nearby obstacle.

Run: python3 demos/03_membrane_obstacle.py
"""
from koitervi import Chart, LameConstants, build_mesh, solve_membrane_limit

chart = Chart.sphere(1.0, 0.5)
mesh = build_mesh(chart, 16)
lame = LameConstants(1.0, 1.0)

for gap in ("1000", "0.5", "0.3", "0.1"):
    sol = solve_membrane_limit(chart, mesh, lame, gap, ("0", "0", "-40*(0.3 - y1^2 - y2^2)"))
    print(f"gap {gap:>5s}: min eta3 = {sol.nodal[2].min():+.5f}, "
          f"{len(sol.report.active_set):3d} nodes in contact, "
          f"feasibility {sol.feasibility:+.1e}")
# With a distant obstacle the shell sags freely. As the gap shrinks the
# transverse displacement is capped at -gap and the contact set grows.
