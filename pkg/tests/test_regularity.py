import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from generators import concave_gap_instance, feasible_membrane_field
from koitervi.asymptotics import solve_membrane_limit
from koitervi.errors import (ArgumentError, ConvexifierSearchError, DomainError,
                             PreconditionError)
from koitervi.fem import build_mesh
from koitervi.geometry import Chart
from koitervi.regularity import (PROBE_HEADER, GridField, build_convexifier, common_restrict,
                                 convexifier_hessian, density_approximant, diff_backward,
                                 diff_forward, diff_second, feasible_perturbation, grid_h1,
                                 grid_l2, interior_regularity_probe, shift, write_probe_csv)
from koitervi.shell import LameConstants

SPHERE = Chart.sphere(1.0, 0.5)
LAME = LameConstants(1.0, 1.0)


def _field(fun, n=20):
    return GridField.from_function(fun, 0.5, n)


def test_forward_difference_of_linear_and_constant():
    f = _field(lambda y1, y2: y1)
    for k in (1, 3):
        np.testing.assert_allclose(diff_forward(f, 1, k * f.h0).values, 1.0, atol=1e-12)
    assert np.all(diff_forward(_field("3"), 2, 0.05).values == 0)


def test_leibniz_rule():
    rng = np.random.default_rng(0)
    v = _field(lambda a, b: rng.standard_normal(a.shape))
    w = _field(lambda a, b: rng.standard_normal(a.shape))
    h = 2 * v.h0
    for rho in (1, 2):
        lhs = diff_forward(v.with_values(v.values * w.values), rho, h)
        Dv, Dw, Ew = diff_forward(v, rho, h), diff_forward(w, rho, h), shift(w, rho, h)
        vv, Ew = common_restrict(v, Ew)
        rhs = Ew.values * Dv.values + common_restrict(vv, Dw)[0].values * Dw.values
        np.testing.assert_allclose(lhs.values, rhs, atol=1e-12)


def test_second_difference_identities():
    f = _field(lambda y1, y2: y1 ** 2 + y1 * y2)
    np.testing.assert_allclose(diff_second(f, 1, 0.1).values, 2.0, atol=1e-10)
    rng = np.random.default_rng(1)
    g = _field(lambda a, b: rng.standard_normal(a.shape))
    for rho in (1, 2):
        h = 2 * g.h0
        comp = diff_backward(diff_forward(g, rho, h), rho, h)
        d2 = diff_second(g, rho, h)
        assert comp.origin == pytest.approx(d2.origin)
        np.testing.assert_allclose(comp.values, d2.values, atol=1e-12)
    conc = _field(lambda y1, y2: -(y1 ** 2 + y2 ** 2))
    assert np.all(diff_second(conc, 2, 0.05).values == pytest.approx(-2.0))


def test_difference_guards():
    f = _field("y1", n=4)
    with pytest.raises(ArgumentError):
        diff_forward(f, 3, f.h0)
    with pytest.raises(ArgumentError):
        diff_forward(f, 1, 0.3 * f.h0)
    with pytest.raises(DomainError):
        diff_second(f, 1, 3 * f.h0)


def test_perturbation_of_zero_is_zero():
    eta, s, phi, rho, h, coeff = concave_gap_instance(np.random.default_rng(2), n=16)
    zero = eta.with_values(np.zeros(eta.shape))
    s = _field(lambda y1, y2: 1 - (y1 ** 2 + y2 ** 2) / 4, 16)
    out = feasible_perturbation(zero, s, phi, rho, h, coeff)
    assert np.all(out.values == 0)


def test_perturbation_touching_the_obstacle():
    rng = np.random.default_rng(3)
    n = 24
    for _ in range(50):
        s = _field(lambda y1, y2: 1 - (y1 ** 2 + y2 ** 2) / 4, n)
        eta = s.with_values(-s.values)
        k = int(rng.integers(1, 4))
        h = k * s.h0
        phi = rng.uniform(0, 1, s.shape)
        phi[:k] = phi[-k:] = 0
        phi[:, :k] = phi[:, -k:] = 0
        rho = int(rng.integers(1, 3))
        out = feasible_perturbation(eta, s, s.with_values(phi), rho, h,
                                    rng.uniform(0.01, 0.99) * h * h / 2)
        assert np.all(out.values + s.values >= -1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_perturbation_stays_feasible(seed):
    eta, s, phi, rho, h, coeff = concave_gap_instance(np.random.default_rng(seed))
    out = feasible_perturbation(eta, s, phi, rho, h, coeff)
    assert np.all(out.values + s.values >= -1e-12)
    changed = out.values != eta.values
    assert not np.any(changed & (phi.values == 0))


def test_perturbation_refuses_convex_gap():
    s = _field(lambda y1, y2: y1 ** 2 + y2 ** 2 + 0.01, 16)
    eta = s.with_values(-s.values)
    phi = np.zeros(s.shape)
    phi[4:-4, 4:-4] = 1.0
    with pytest.raises(PreconditionError, match="concave"):
        feasible_perturbation(eta, s, s.with_values(phi), 1, s.h0, 0.4 * s.h0 ** 2)


def test_perturbation_argument_guards():
    eta, s, phi, rho, h, coeff = concave_gap_instance(np.random.default_rng(4), n=16)
    with pytest.raises(ArgumentError):
        feasible_perturbation(eta, s, phi, rho, h, 0.5 * h * h)
    with pytest.raises(ArgumentError):
        feasible_perturbation(eta, s, phi.with_values(phi.values * 2 + 0.1), rho, h, coeff)
    bad = phi.values.copy()
    bad[0, 0] = bad[-1, -1] = 0.5
    with pytest.raises(PreconditionError):
        feasible_perturbation(eta, s, phi.with_values(bad), rho, h, coeff)


def test_convexifier_constant_gap():
    cv = build_convexifier("1", (0.0, 0.0))
    assert (cv.r, cv.B) == (1.0, 0.0)
    Y1, Y2 = np.meshgrid([0.0], [0.0], indexing="ij")
    H = convexifier_hessian("1", (0, 0), 1.0, 0.0, Y1, Y2)[0, 0]
    np.testing.assert_allclose(H, 0.5 * np.ones((2, 2)))


@pytest.mark.parametrize("s,y0", [("1", (0.0, 0.0)), ("2 + sin(y1)", (0.25, 0.0)),
                                  ("1 + 0.25*y1*y2", (0.0, 0.0))])
def test_convexifier_certificates(s, y0):
    cv = build_convexifier(s, y0)
    U1, U2 = cv.U_grid(33)
    H = convexifier_hessian(s, y0, cv.r, cv.B, U1, U2)
    assert np.linalg.eigvalsh(H).min() >= -1e-10
    g = cv.g(U1, U2)
    assert g.min() >= 0.25 and g.max() <= 1.0
    assert cv.U_halfwidth <= np.log(1.5) / (2 * cv.r) + 1e-15


def test_convexifier_search_failure_reports_constants():
    with pytest.raises(ConvexifierSearchError) as info:
        build_convexifier("2 + sin(y1)", (0.0, 0.0))
    assert info.value.M > 0 and info.value.T > 0
    with pytest.raises(PreconditionError):
        build_convexifier("y1", (0.0, 0.0))


def test_density_trivial_cases():
    eta = feasible_membrane_field(np.random.default_rng(0), n=32)
    zero = (eta[0], eta[1], eta[2].with_values(np.zeros(eta[2].shape)))
    assert np.all(density_approximant(zero, 8, 0.5)[2].values == 0)
    assert np.all(density_approximant(eta, 1, 0.5)[2].values == 0)
    with pytest.raises(PreconditionError):
        density_approximant(eta, 4, 0.0)


@pytest.mark.parametrize("seed", range(3))
def test_density_margin_and_convergence(seed):
    eta = feasible_membrane_field(np.random.default_rng(seed))
    errs = []
    for k in (8, 16, 32, 64):
        approx = density_approximant(eta, k, 0.5)[2]
        assert np.min(approx.values + 0.5) >= 0.5 / k - 1e-12
        assert np.all(approx.values[approx.boundary_distance() < 0.5 / k] == 0)
        errs.append(grid_l2(approx.with_values(approx.values - eta[2].values)))
    assert errs[-1] < 0.5 * errs[0]


def test_grid_norms():
    f = _field("1", 40)
    assert grid_l2(f) == pytest.approx(1.0)
    g = _field("y1", 40)
    # the trapezoid rule on y1^2 carries an O(h^2) error
    assert grid_h1(g) == pytest.approx(np.sqrt(1 / 12 + 1), rel=1e-4)


@pytest.fixture(scope="module")
def smooth_solution():
    mesh = build_mesh(SPHERE, 64)
    return solve_membrane_limit(SPHERE, mesh, LAME, "1000", ("y1", "cos(y2)", "1 + y1*y2"))


def test_probe_is_bounded(smooth_solution, tmp_path):
    table = interior_regularity_probe(smooth_solution, ((0.0, 0.0), 0.25))
    assert set(table.ratios) == {1, 2}
    assert all(r <= 1.2 for r in table.ratios.values())
    write_probe_csv(table, tmp_path / "probe.csv")
    rows = list(csv.reader(open(tmp_path / "probe.csv")))
    assert rows[0] == PROBE_HEADER and len(rows) == 7


def test_probe_zero_load():
    mesh = build_mesh(SPHERE, 64)
    sol = solve_membrane_limit(SPHERE, mesh, LAME, "1000", ("0", "0", "0"))
    table = interior_regularity_probe(sol, ((0.0, 0.0), 0.25))
    assert all(r[2] == 0.0 and r[3] == 0.0 for r in table.rows)


def test_probe_margin_guard(smooth_solution):
    with pytest.raises(DomainError):
        interior_regularity_probe(smooth_solution, ((0.0, 0.0), 0.45))
