"""Discrete Korn constant on the sphere, and its collapse on the plate.

Run: python3 demos/05_korn.py
"""
from koitervi import Chart, DegenerateKornError, LameConstants, build_mesh, korn_constant

lame = LameConstants(1.0, 1.0)
for nx in (4, 8):
    chart = Chart.sphere(1.0, 0.5)
    res = korn_constant(chart, build_mesh(chart, nx), lame)
    print(f"sphere nx={nx}: lambda_min {res.lambda_min:.6f}, c0 {res.c0_estimate:.4f}")

plate = Chart.plate(0.5)
try:
    korn_constant(plate, build_mesh(plate, 8), lame)
except DegenerateKornError as exc:
    # a uniform transverse shift costs no membrane energy on a flat surface
    print("plate:", exc)
