"""
Solvers for box-constrained SPD quadratic programs

    minimize 1/2 u.Au - f.u   subject to  u >= lower,  u = 0 on clamped dofs.

``solve_box_qp_pdas`` is the production solver (primal-dual active set with
inner conjugate gradients). ``solve_box_qp_psor`` (projected SOR) and
``solve_box_qp_enumerate`` (brute force over active sets) are independent
cross-checks.
"""

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ArgumentError, NonConvergenceError
from .fem import BoxQP

__all__ = [
    "SolveReport",
    "solve_cg",
    "solve_box_qp_pdas",
    "solve_box_qp_psor",
    "solve_box_qp_enumerate",
    "kkt_residual",
    "random_box_qp",
]

log = logging.getLogger(__name__)


@dataclass
class SolveReport:
    u: np.ndarray
    active_set: np.ndarray
    multipliers: np.ndarray      # A u - f on the active set, aligned with active_set
    iterations: int
    kkt_residual: float
    objective: float
    history: list = field(default_factory=list)
    # sum over active dofs of |lambda_d (u_d - lower_d)|
    complementarity: float = 0.0


def solve_cg(A, f, free_mask=None, tol=1e-10, max_iter=None, x0=None):
    """Jacobi-preconditioned conjugate gradients on the free dofs.

    Stops when the true residual satisfies ``max |A u - f| <= tol`` over the
    free dofs. Clamped dofs are returned as exactly 0.

    Raises
    ------
    NonConvergenceError
        After ``max_iter`` iterations, carrying the residual history.
    """
    A = sp.csr_matrix(A)
    f = np.asarray(f, dtype=float)
    n = f.shape[0]
    free = np.ones(n, bool) if free_mask is None else np.asarray(free_mask, bool)
    idx = np.flatnonzero(free)
    Aff = A[idx][:, idx].tocsr()
    b = f[idx]
    x = np.zeros(len(idx)) if x0 is None else np.asarray(x0, float)[idx].copy()
    max_iter = 10 * max(len(idx), 10) if max_iter is None else max_iter
    u = np.zeros(n)
    history = []
    if len(idx) == 0:
        return u
    d = Aff.diagonal()
    if np.any(d <= 0):
        raise ArgumentError("matrix must have a positive diagonal on free dofs")
    dinv = 1.0 / d
    it = 0
    while True:
        r = b - Aff @ x
        res = float(np.max(np.abs(r)))
        history.append(res)
        if res <= tol:
            break
        z = dinv * r
        p = z.copy()
        rz = r @ z
        # inner loop on the recursive residual; the outer loop re-checks the
        # true residual, which protects against drift
        while it < max_iter:
            it += 1
            q = Aff @ p
            pq = p @ q
            if pq <= 0:
                raise NonConvergenceError("matrix is not positive definite on free dofs",
                                          history)
            alpha = rz / pq
            x += alpha * p
            r -= alpha * q
            res = float(np.max(np.abs(r)))
            history.append(res)
            if res <= 0.5 * tol:
                break
            z = dinv * r
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
        if it >= max_iter:
            true_res = float(np.max(np.abs(b - Aff @ x)))
            if true_res <= tol:
                break
            raise NonConvergenceError(
                f"CG did not reach tol={tol:.3g} in {max_iter} iterations "
                f"(residual {true_res:.3g})", history)
    u[idx] = x
    return u


def kkt_residual(qp, u, active=None):
    """Max of stationarity on inactive free dofs, sign of multipliers on
    active dofs and bound violation."""
    free = qp.free_mask
    g = qp.A @ u - qp.f
    if active is None:
        active = _active_mask_from_solution(qp, u)
    inactive = free & ~active
    parts = [0.0]
    if np.any(inactive):
        parts.append(np.max(np.abs(g[inactive])))
    if np.any(active):
        parts.append(np.max(np.maximum(0.0, -g[active])))
    viol = np.maximum(0.0, qp.lower[free] - u[free])
    if viol.size:
        parts.append(np.max(viol))
    return float(max(parts))


def _active_mask_from_solution(qp, u):
    return qp.free_mask & np.isfinite(qp.lower) & (u <= qp.lower)


def _finish(qp, u, active, iterations, history):
    g = qp.A @ u - qp.f
    act = np.flatnonzero(active)
    rep = SolveReport(u=u, active_set=act, multipliers=g[act],
                      iterations=iterations,
                      kkt_residual=kkt_residual(qp, u, active),
                      objective=float(qp.objective(u)), history=history)
    rep.complementarity = float(np.sum(np.abs(g[act] * (u[act] - qp.lower[act]))))
    return rep


def solve_box_qp_pdas(qp, tol=1e-9, max_iter=100, inner_max_iter=None):
    """Primal-dual active set method.

    A bounded dof is predicted active when ``lambda + (lower - u) > 0`` with
    ``lambda = A u - f``; exact ties are classified inactive. Iteration stops
    when two consecutive active sets coincide and the KKT residual is below
    ``tol``. Inner solves use CG with tolerance ``0.01 * tol``.

    Returns
    -------
    SolveReport

    Raises
    ------
    NonConvergenceError
        If the active set keeps changing after ``max_iter`` iterations.
    """
    _check_qp(qp)
    free = qp.free_mask
    bounded = free & np.isfinite(qp.lower)
    lower0 = np.where(bounded, qp.lower, 0.0)
    inner_tol = 0.01 * tol
    u = np.zeros(qp.f.shape[0])
    active = np.zeros_like(free)
    history = []
    prev_sets = []
    for it in range(1, max_iter + 1):
        u = _solve_with_active(qp, active, lower0, inner_tol, u, inner_max_iter)
        lam = qp.A @ u - qp.f
        lam[~active] = 0.0
        new_active = bounded & (lam + (lower0 - u) > 0)
        res = kkt_residual(qp, u, active)
        history.append((int(active.sum()), res))
        log.debug("pdas it=%d active=%d kkt=%.3e", it, active.sum(), res)
        if np.array_equal(new_active, active) and res <= tol:
            return _finish(qp, u, active, it, history)
        prev_sets = (prev_sets + [np.flatnonzero(active)])[-2:]
        active = new_active
    raise NonConvergenceError(
        f"active set did not settle in {max_iter} iterations; last two sets "
        f"{[s.tolist() for s in prev_sets]}", history)


def _solve_with_active(qp, active, lower0, tol, u0, max_iter):
    u = np.zeros_like(u0)
    u[active] = lower0[active]
    inactive = qp.free_mask & ~active
    rhs = qp.f - qp.A @ u
    x0 = np.where(inactive, u0, 0.0)
    x = solve_cg(qp.A, rhs, inactive, tol=tol, max_iter=max_iter, x0=x0)
    u[inactive] = x[inactive]
    return u


def solve_box_qp_psor(qp, tol=1e-9, max_iter=100000, relaxation=1.2):
    """Projected successive over-relaxation.

    Each sweep updates ``u_i <- max(lower_i, u_i + w (f_i - (A u)_i) / A_ii)``
    over the free dofs in index order.
    """
    _check_qp(qp)
    if not 0 < relaxation < 2:
        raise ArgumentError("relaxation must lie in (0, 2)")
    A = sp.csr_matrix(qp.A)
    free = np.flatnonzero(qp.free_mask)
    diag = A.diagonal()
    if np.any(diag[free] <= 0):
        raise ArgumentError("PSOR needs a positive diagonal")
    indptr, indices, data = A.indptr, A.indices, A.data
    f = qp.f
    lower = qp.lower
    n = f.shape[0]
    u = np.zeros(n)
    u[free] = np.maximum(0.0, lower[free])
    history = []
    dense = n <= 400
    if dense:
        Ad = A.toarray()
    for sweep in range(1, max_iter + 1):
        for i in free:
            if dense:
                ri = f[i] - Ad[i] @ u
            else:
                s, e = indptr[i], indptr[i + 1]
                ri = f[i] - data[s:e] @ u[indices[s:e]]
            ui = u[i] + relaxation * ri / diag[i]
            u[i] = ui if ui > lower[i] else lower[i]
        if sweep % 5 == 0 or sweep == 1:
            res = kkt_residual(qp, u)
            history.append(res)
            if res <= tol:
                return _finish(qp, u, _active_mask_from_solution(qp, u), sweep, history)
    raise NonConvergenceError(f"PSOR did not converge in {max_iter} sweeps",
                              history)


def solve_box_qp_enumerate(qp):
    """Exact solution by trying every active set of the bounded dofs.

    Only for tiny problems; picks the unique KKT-feasible candidate.
    """
    _check_qp(qp)
    A = sp.csr_matrix(qp.A).toarray()
    free = qp.free_mask
    bounded = np.flatnonzero(free & np.isfinite(qp.lower))
    if len(bounded) > 12:
        raise ArgumentError("enumeration is limited to 12 bounded dofs")
    for k in range(len(bounded) + 1):
        for subset in itertools.combinations(bounded, k):
            active = np.zeros(len(free), bool)
            active[list(subset)] = True
            u = np.zeros(len(free))
            u[active] = qp.lower[active]
            inact = free & ~active
            if np.any(inact):
                rhs = qp.f[inact] - A[np.ix_(inact, active)] @ u[active]
                u[inact] = np.linalg.solve(A[np.ix_(inact, inact)], rhs)
            lam = A @ u - qp.f
            if np.all(u[free] >= qp.lower[free]) and np.all(lam[active] >= 0):
                return _finish(qp, u, active, 1, [])
    raise ArgumentError("no KKT-feasible active set found")


def _check_qp(qp):
    if not isinstance(qp, BoxQP):
        raise ArgumentError("expected a BoxQP")


def random_box_qp(rng, n, bounded_fraction=0.3, cond=10.0):
    """Random SPD box QP with eigenvalues in [1, cond] and finite bounds on
    a random subset of dofs, placed around the unconstrained minimiser so
    that roughly half of them bind."""
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    ev = np.exp(rng.uniform(0.0, np.log(cond), n))
    A = (Q * ev) @ Q.T
    A = 0.5 * (A + A.T)
    f = rng.standard_normal(n)
    ustar = np.linalg.solve(A, f)
    lower = np.full(n, -np.inf)
    k = max(1, int(round(bounded_fraction * n)))
    idx = rng.choice(n, size=k, replace=False)
    lower[idx] = ustar[idx] + rng.normal(0.0, 0.5, size=k)
    return BoxQP(sp.csr_matrix(A), f, lower, np.ones(n, bool))
