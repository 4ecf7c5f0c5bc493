"""Curvature of the three built-in charts, and why the plate is refused.

Run: python3 demos/01_geometry.py
"""
import numpy as np

from koitervi import Chart, NonEllipticError, assert_elliptic, eval_geometry

t = np.linspace(-0.5, 0.5, 5)
Y = np.stack(np.meshgrid(t, t, indexing="ij"), axis=-1)

for chart in (Chart.sphere(2.0, 0.5), Chart.ellipsoid(1.2, 1.0, 0.8)):
    K = eval_geometry(chart, Y).gauss_K
    print(f"{chart.kind:9s} K in [{K.min():.4f}, {K.max():.4f}]")

# The sphere of radius 2 has K = 1/4 everywhere. The ellipsoid is elliptic
# with curvature varying across the chart. The plate has K = 0.
try:
    assert_elliptic(Chart.plate(0.5))
except NonEllipticError as exc:
    print("plate:", exc)
