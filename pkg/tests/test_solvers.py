import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from koitervi.errors import ArgumentError, NonConvergenceError
from koitervi.fem import BoxQP
from koitervi.solvers import (kkt_residual, random_box_qp, solve_box_qp_enumerate,
                              solve_box_qp_pdas, solve_box_qp_psor, solve_cg)

SOLVERS = [solve_box_qp_pdas, solve_box_qp_psor, solve_box_qp_enumerate]


def test_cg_small_systems():
    np.testing.assert_allclose(solve_cg(2 * sp.eye(5), np.full(5, 2.0)), 1.0)
    L = sp.diags([-1, 2, -1], [-1, 0, 1], shape=(4, 4))
    np.testing.assert_allclose(solve_cg(L, np.ones(4), tol=1e-14), [2, 3, 3, 2], atol=1e-12)


def test_cg_matches_dense_solve():
    rng = np.random.default_rng(1)
    Q = rng.standard_normal((50, 50))
    A = Q @ Q.T + 50 * np.eye(50)
    f = rng.standard_normal(50)
    np.testing.assert_allclose(solve_cg(A, f, tol=1e-12), np.linalg.solve(A, f), atol=1e-8)


def test_cg_respects_clamped_dofs_and_raises():
    A = sp.diags([-1, 2.5, -1], [-1, 0, 1], shape=(6, 6))
    free = np.array([0, 1, 1, 1, 1, 0], bool)
    u = solve_cg(A, np.ones(6), free)
    assert u[0] == 0 and u[-1] == 0
    with pytest.raises(NonConvergenceError) as info:
        solve_cg(sp.diags([-1, 2, -1], [-1, 0, 1], shape=(200, 200)), np.ones(200),
                 tol=1e-14, max_iter=3)
    assert len(info.value.history) > 0


@pytest.mark.parametrize("solver", SOLVERS)
def test_two_dof_closed_forms(solver):
    qp = BoxQP(2 * sp.eye(2), np.array([2.0, 2.0]), np.array([-np.inf, 2.0]))
    rep = solver(qp)
    np.testing.assert_allclose(rep.u, [1.0, 2.0], atol=1e-12)
    assert list(rep.active_set) == [1]
    np.testing.assert_allclose(rep.multipliers, [2.0], atol=1e-12)
    rep = solver(BoxQP(2 * sp.eye(2), np.array([2.0, 2.0]), None))
    np.testing.assert_allclose(rep.u, [1.0, 1.0], atol=1e-12)
    assert len(rep.active_set) == 0


@pytest.mark.parametrize("solver", SOLVERS)
def test_one_dof_active(solver):
    rep = solver(BoxQP(sp.csr_matrix([[4.0]]), np.array([-4.0]), np.array([0.0])))
    assert rep.u[0] == 0.0
    np.testing.assert_allclose(rep.multipliers, [4.0])


def test_three_dof_tridiagonal_against_enumeration():
    A = sp.csr_matrix(np.array([[2.0, -1, 0], [-1, 2, -1], [0, -1, 2]]))
    f = np.array([1.0, -3.0, 1.0])
    lower = np.array([-np.inf, -0.5, -np.inf])
    qp = BoxQP(A, f, lower)
    ref = solve_box_qp_enumerate(qp)
    assert list(ref.active_set) == [1]
    for solver in (solve_box_qp_pdas, solve_box_qp_psor):
        rep = solver(qp)
        np.testing.assert_allclose(rep.u, ref.u, atol=1e-10)
        assert list(rep.active_set) == list(ref.active_set)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(5, 60))
def test_pdas_agrees_with_psor(seed, n):
    qp = random_box_qp(np.random.default_rng(seed), n)
    a = solve_box_qp_pdas(qp, tol=1e-11)
    b = solve_box_qp_psor(qp, tol=1e-11)
    assert np.max(np.abs(a.u - b.u)) <= 1e-8
    assert a.kkt_residual <= 1e-9
    assert a.complementarity <= 1e-9
    assert np.all(a.u >= qp.lower - 1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 6))
def test_pdas_agrees_with_enumeration(seed, n):
    qp = random_box_qp(np.random.default_rng(seed), n, bounded_fraction=0.7)
    a = solve_box_qp_pdas(qp, tol=1e-12)
    b = solve_box_qp_enumerate(qp)
    np.testing.assert_allclose(a.u, b.u, atol=1e-10)
    assert set(a.active_set) == set(b.active_set)


def test_objective_decreases_from_feasible_start():
    qp = random_box_qp(np.random.default_rng(5), 40)
    rep = solve_box_qp_pdas(qp)
    start = np.maximum(np.zeros(40), qp.lower)
    assert rep.objective <= qp.objective(start) + 1e-12
    assert rep.objective == pytest.approx(qp.objective(rep.u))


def test_kkt_residual_detects_violation():
    qp = BoxQP(2 * sp.eye(2), np.array([2.0, 2.0]), np.array([-np.inf, 2.0]))
    assert kkt_residual(qp, np.array([1.0, 2.0])) < 1e-14
    assert kkt_residual(qp, np.array([1.0, 1.5])) >= 0.5
    assert kkt_residual(qp, np.array([0.5, 2.0])) >= 1.0


def test_enumeration_size_guard():
    qp = random_box_qp(np.random.default_rng(0), 40, bounded_fraction=0.5)
    with pytest.raises(ArgumentError):
        solve_box_qp_enumerate(qp)
