import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from koitervi.errors import ArgumentError, ContractError
from koitervi.geometry import Chart, eval_geometry, eval_geometry_derivatives
from koitervi.shell import (LameConstants, StrainPointValues, elasticity_tensor,
                            energy_densities, gamma_ab, rho_ab)

A1, A2, A3 = 1.2, 1.0, 0.8
POINT = (0.23, -0.31)


@pytest.fixture(scope="module")
def sympy_strains():
    """gamma and rho as derivatives at t=0 of the metric and curvature of
    theta + t * eta_i a^i, evaluated at POINT."""
    sympy = pytest.importorskip("sympy")
    y1, y2, t = sympy.symbols("y1 y2 t")
    ys = (y1, y2)
    f = -A3 * sympy.sqrt(1 - y1 ** 2 / A1 ** 2 - y2 ** 2 / A2 ** 2)
    theta = sympy.Matrix([y1, y2, f])
    a = [theta.diff(v) for v in ys]
    n = a[0].cross(a[1])
    a3 = n / sympy.sqrt(n.dot(n))
    acov = sympy.Matrix(2, 2, lambda i, j: a[i].dot(a[j]))
    ainv = acov.inv()
    acon = [ainv[k, 0] * a[0] + ainv[k, 1] * a[1] for k in range(2)]
    eta = [sympy.sin(y1) * y2 + 0.3, y1 ** 2 - 0.5 * y2, sympy.cos(y1 + 2 * y2)]
    u = eta[0] * acon[0] + eta[1] * acon[1] + eta[2] * a3
    moved = theta + t * u
    m = [moved.diff(v) for v in ys]
    mn = m[0].cross(m[1])
    m3 = mn / sympy.sqrt(mn.dot(mn))
    pt = {y1: POINT[0], y2: POINT[1]}
    gam = np.zeros((2, 2))
    rho = np.zeros((2, 2))
    for i in range(2):
        for j in range(2):
            g_ij = sympy.Rational(1, 2) * m[i].dot(m[j])
            b_ij = moved.diff(ys[i]).diff(ys[j]).dot(m3)
            gam[i, j] = float(g_ij.subs(pt).diff(t).subs(t, 0).evalf())
            rho[i, j] = float(b_ij.subs(pt).diff(t).subs(t, 0).evalf())
    vals = np.array([float(e.subs(pt)) for e in eta])
    grads = np.array([[float(e.diff(v).subs(pt)) for v in ys] for e in eta])
    hess = np.array([[float(eta[2].diff(v).diff(w).subs(pt)) for w in ys] for v in ys])
    return vals, grads, hess, gam, rho


def test_membrane_strain_is_linearised_metric(sympy_strains):
    vals, grads, _, gam, _ = sympy_strains
    g = eval_geometry(Chart.ellipsoid(A1, A2, A3), POINT)
    np.testing.assert_allclose(gamma_ab(g, vals, grads).gamma, gam, atol=1e-12)


def test_bending_strain_is_linearised_curvature(sympy_strains):
    vals, grads, hess, _, rho = sympy_strains
    chart = Chart.ellipsoid(A1, A2, A3)
    g = eval_geometry(chart, POINT)
    d = eval_geometry_derivatives(chart, POINT, g)
    np.testing.assert_allclose(rho_ab(g, d, vals, grads, hess).rho, rho, atol=1e-12)


def test_rigid_motions_have_no_strain():
    # a rigid translation e3 expressed in covariant components: eta_i = e3 . a_i
    chart = Chart.sphere(1.0)
    y = np.array([0.1, 0.2])
    h = 1e-6

    def comps(p):
        g = eval_geometry(chart, p)
        return np.array([g.a_cov[0, 2], g.a_cov[1, 2], g.a3[2]])

    grads = np.stack([(comps(y + h * e) - comps(y - h * e)) / (2 * h) for e in np.eye(2)], axis=-1)
    g = eval_geometry(chart, y)
    np.testing.assert_allclose(gamma_ab(g, comps(y), grads).gamma, 0.0, atol=1e-8)


def test_bending_strain_contract():
    g = eval_geometry(Chart.sphere(), (0.0, 0.0))
    d = eval_geometry_derivatives(Chart.sphere(), (0.0, 0.0))
    with pytest.raises(ContractError):
        rho_ab(g, d, np.zeros(3), np.zeros((3, 2)))
    with pytest.raises(ContractError):
        rho_ab(g, d, np.zeros(3), np.zeros((2, 2)), np.zeros((2, 2)))


def test_lame_validation():
    with pytest.raises(ArgumentError):
        LameConstants(1.0, 0.0)
    with pytest.raises(ArgumentError):
        LameConstants(-0.1, 1.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(0, 5), st.floats(0.1, 5))
def test_elasticity_tensor_symmetric_positive(y1, y2, lam, mu):
    g = eval_geometry(Chart.ellipsoid(A1, A2, A3), (y1, y2))
    T = elasticity_tensor(g, LameConstants(lam, mu))
    c = T.comp
    np.testing.assert_allclose(c, np.swapaxes(c, 0, 1), atol=1e-12)
    np.testing.assert_allclose(c, np.transpose(c, (2, 3, 0, 1)), atol=1e-12)
    assert T.positivity_constant() > 0
    # quadratic_matrix reproduces the contraction on symmetric tensors
    rng = np.random.default_rng(0)
    s = rng.standard_normal((2, 2))
    s = s + s.T
    v = np.array([s[0, 0], s[1, 1], np.sqrt(2) * s[0, 1]])
    assert v @ T.quadratic_matrix() @ v == pytest.approx(np.einsum("abst,st,ab->", c, s, s),
                                                         rel=1e-10, abs=1e-12)


def test_energy_densities_flexural_third():
    g = eval_geometry(Chart.plate(), (0.0, 0.0))
    T = elasticity_tensor(g, LameConstants(1.0, 1.0))
    s = StrainPointValues(gamma=np.eye(2), rho=np.eye(2))
    mem, flex = energy_densities(T, s, s)
    full = np.einsum("abst,st,ab->", T.comp, np.eye(2), np.eye(2))
    assert mem == pytest.approx(full)
    assert flex == pytest.approx(full / 3)


DELTA_GEOM = eval_geometry(Chart.plate(), (0.0, 0.0))


def test_tensor_entries_on_flat_metric():
    c = elasticity_tensor(DELTA_GEOM, LameConstants(1.0, 1.0)).comp
    assert c[0, 0, 0, 0] == pytest.approx(16 / 3)
    assert c[0, 0, 1, 1] == pytest.approx(4 / 3)
    assert c[0, 1, 0, 1] == pytest.approx(2.0)
    c0 = elasticity_tensor(DELTA_GEOM, LameConstants(0.0, 1.0)).comp
    assert c0[0, 0, 0, 0] == pytest.approx(4.0)
    assert c0[0, 0, 1, 1] == 0.0


def test_tensor_eigenvalue_bound_for_random_metrics():
    rng = np.random.default_rng(7)
    mu = 0.8
    for _ in range(10):
        L = rng.standard_normal((2, 2))
        Acon = L @ L.T + 0.2 * np.eye(2)
        c = elasticity_tensor(Acon, LameConstants(1.3, mu)).comp
        lo = 2 * mu * np.linalg.eigvalsh(Acon)[0] ** 2
        for _ in range(50):
            t = rng.standard_normal((2, 2))
            t = t + t.T
            assert np.einsum("abst,st,ab->", c, t, t) >= lo * np.sum(t * t) - 1e-12


def test_membrane_strain_examples():
    grads = np.zeros((3, 2))
    grads[0] = (1.0, 0.0)
    gam = gamma_ab(DELTA_GEOM, np.array([0.0, 0.0, 7.0]), grads).gamma
    np.testing.assert_allclose(gam, [[1.0, 0.0], [0.0, 0.0]])
    apex = eval_geometry(Chart.sphere(1.0), (0.0, 0.0))
    gam = gamma_ab(apex, np.array([0.0, 0.0, 1.0]), np.zeros((3, 2))).gamma
    np.testing.assert_allclose(gam, -np.eye(2), atol=1e-15)


def test_membrane_strain_against_direct_formula():
    rng = np.random.default_rng(11)
    g = eval_geometry(Chart.sphere(1.0), (0.2, 0.1))
    eta = rng.standard_normal(3)
    grads = rng.standard_normal((3, 2))
    ref = np.empty((2, 2))
    for a in range(2):
        for b in range(2):
            ref[a, b] = (0.5 * (grads[a, b] + grads[b, a])
                         - sum(g.christoffel[s, a, b] * eta[s] for s in range(2))
                         - g.b_cov[a, b] * eta[2])
    np.testing.assert_allclose(gamma_ab(g, eta, grads).gamma, ref, atol=1e-12)


def test_bending_strain_examples():
    d = eval_geometry_derivatives(Chart.plate(), (0.3, 0.1))
    g = eval_geometry(Chart.plate(), (0.3, 0.1))
    grads = np.zeros((3, 2))
    grads[2] = (0.6, 0.0)                                  # w = y1^2
    rho = rho_ab(g, d, np.array([0.0, 0.0, 0.09]), grads, np.diag([2.0, 0.0])).rho
    np.testing.assert_allclose(rho, [[2.0, 0.0], [0.0, 0.0]])
    s = Chart.sphere(1.0)
    zero = rho_ab(eval_geometry(s, (0.1, 0.1)), eval_geometry_derivatives(s, (0.1, 0.1)),
                  np.zeros(3), np.zeros((3, 2)), np.zeros((2, 2))).rho
    assert np.all(zero == 0)


def test_energy_density_examples():
    T = elasticity_tensor(DELTA_GEOM, LameConstants(1.0, 1.0))
    zero = StrainPointValues(gamma=np.zeros((2, 2)), rho=np.zeros((2, 2)))
    assert energy_densities(T, zero, zero) == (0.0, 0.0)
    s = StrainPointValues(gamma=np.eye(2), rho=np.zeros((2, 2)))
    mem, flex = energy_densities(T, s, s)
    assert mem == pytest.approx(40 / 3)
    assert flex == 0.0
    rng = np.random.default_rng(2)
    s1 = StrainPointValues(gamma=rng.standard_normal((2, 2)), rho=rng.standard_normal((2, 2)))
    s2 = StrainPointValues(gamma=rng.standard_normal((2, 2)), rho=rng.standard_normal((2, 2)))
    np.testing.assert_allclose(energy_densities(T, s1, s2), energy_densities(T, s2, s1))
