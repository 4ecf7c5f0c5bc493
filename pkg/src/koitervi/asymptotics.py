"""
Membrane limit and Koiter obstacle solves, the thickness sweep comparing
them, and the discrete Korn constant of the membrane space.
"""

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import ArgumentError, DegenerateKornError, NonEllipticError, KoiterviError
from .fem import (KOITER, MEMBRANE, BoxQP, GapField, apply_dirichlet, assemble_flexural,
                  assemble_gap_bounds, assemble_load, assemble_membrane,
                  assemble_vm_norm_matrix, build_dofmap, make_gap_field, q1_matrices)
from .geometry import MAX_EPS, assert_elliptic
from .report import fmt_float
from .solvers import solve_box_qp_pdas, solve_cg

__all__ = [
    "ErrorNorms",
    "SweepReport",
    "ShellSolve",
    "solve_membrane_limit",
    "solve_koiter",
    "epsilon_sweep",
    "korn_constant",
    "korn_dense",
    "KoiterProblem",
    "KornResult",
    "error_norms",
    "write_sweep_csv",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ErrorNorms:
    """Squared tangential H1 part, squared transverse L2 part and the
    combined norm ``vm_norm = sqrt(h1_tangential + l2_transverse)``."""

    h1_tangential: float
    l2_transverse: float
    vm_norm: float


@dataclass
class ShellSolve:
    """Solution of one obstacle problem plus what is needed to post-process it."""

    report: object              # SolveReport
    dofmap: object
    qp: BoxQP
    gap: GapField
    eps: float = None
    nodal: tuple = None         # (eta1, eta2, eta3) at the nodes

    @property
    def u(self):
        return self.report.u

    @property
    def feasibility(self):
        """min over nodes of eta3 + s."""
        return float(np.min(self.nodal[2] + self.gap.node_values))


def _as_gap(gap, mesh):
    if isinstance(gap, GapField):
        if gap.node_values.shape != (mesh.n_nodes,):
            raise ArgumentError("gap field was sampled on a different mesh")
        return gap
    return make_gap_field(gap if isinstance(gap, str) else repr(float(gap)), mesh)


def _load_exprs(p_exprs):
    out = [p if not isinstance(p, (int, float)) else repr(float(p)) for p in p_exprs]
    if len(out) != 3:
        raise ArgumentError("need three load components p1, p2, p3")
    return out


def solve_membrane_limit(chart, mesh, lame, gap, p_exprs, tol=1e-9, max_iter=200):
    """Discrete membrane obstacle problem on the MEMBRANE space.

    Returns
    -------
    ShellSolve

    Raises
    ------
    NonEllipticError
        For charts that are not elliptic (the form is not coercive).
    """
    try:
        assert_elliptic(chart, 16)
    except NonEllipticError as exc:
        raise NonEllipticError(f"membrane limit refused: {exc}") from None
    dm = build_dofmap(mesh, MEMBRANE)
    gapf = _as_gap(gap, mesh)
    A = assemble_membrane(mesh, dm, chart, lame)
    f = assemble_load(mesh, dm, chart, _load_exprs(p_exprs))
    qp = BoxQP(A, f, assemble_gap_bounds(dm, gapf), dm.free_mask)
    rep = solve_box_qp_pdas(qp, tol=tol, max_iter=max_iter)
    return ShellSolve(rep, dm, qp, gapf, None, dm.nodal_components(rep.u))


class KoiterProblem:
    """Koiter obstacle problem on a fixed mesh; matrices are assembled once and
    reused across thickness values."""

    def __init__(self, chart, mesh, lame, gap, p_exprs):
        self.chart = chart
        self.mesh = mesh
        self.dofmap = build_dofmap(mesh, KOITER)
        self.gap = _as_gap(gap, mesh)
        self.AM = assemble_membrane(mesh, self.dofmap, chart, lame, apply_bc=False)
        self.AF = assemble_flexural(mesh, self.dofmap, chart, lame, apply_bc=False)
        self.f = assemble_load(mesh, self.dofmap, chart, _load_exprs(p_exprs))
        self.lower = assemble_gap_bounds(self.dofmap, self.gap)

    def box_qp(self, eps):
        A = apply_dirichlet(self.AM + eps ** 2 * self.AF, self.dofmap.clamped_mask)
        return BoxQP(A, self.f, self.lower, self.dofmap.free_mask)

    def solve(self, eps, tol=1e-9, max_iter=200):
        eps = _check_eps(eps)
        qp = self.box_qp(eps)
        rep = solve_box_qp_pdas(qp, tol=tol, max_iter=max_iter)
        # the energy of the original scaling carries an overall factor eps
        rep.history.append(("objective_unscaled", eps * rep.objective))
        return ShellSolve(rep, self.dofmap, qp, self.gap, eps,
                          self.dofmap.nodal_components(rep.u))


def _check_eps(eps):
    eps = float(eps)
    if not (0 < eps <= MAX_EPS):
        raise ArgumentError(f"eps must lie in (0, {MAX_EPS}], got {eps}")
    return eps


def solve_koiter(chart, mesh, lame, gap, p_exprs, eps, tol=1e-9, max_iter=200):
    """Koiter obstacle problem with the thickness factor divided out:
    minimise 1/2 (B_M + eps^2 B_F)(u, u) - l(u) over u >= -s on the KOITER space.

    The plate chart is allowed: the bending term makes the form coercive.
    """
    eps = _check_eps(eps)
    return KoiterProblem(chart, mesh, lame, gap, p_exprs).solve(eps, tol, max_iter)


def error_norms(mesh, nodal_a, nodal_b, vm_matrix=None):
    """Norm of the difference of two nodal fields in the Q1 nodal space."""
    K, M = q1_matrices(mesh)
    d = [np.asarray(a) - np.asarray(b) for a, b in zip(nodal_a, nodal_b)]
    KM = K + M
    h1 = float(d[0] @ (KM @ d[0]) + d[1] @ (KM @ d[1]))
    l2 = float(d[2] @ (M @ d[2]))
    h1, l2 = max(h1, 0.0), max(l2, 0.0)
    return ErrorNorms(h1, l2, float(np.sqrt(h1 + l2)))


@dataclass
class SweepReport:
    epsilons: list
    errors: list                     # ErrorNorms per eps
    iterations: list
    active_counts: list
    membrane: ShellSolve = None
    solves: list = field(default_factory=list)
    membrane_solution_id: str = "membrane"

    @property
    def err_vm(self):
        return [e.vm_norm for e in self.errors]

    def rows(self):
        for eps, e, it, na in zip(self.epsilons, self.errors, self.iterations,
                                  self.active_counts):
            yield eps, e.vm_norm, e.h1_tangential, e.l2_transverse, it, na


def epsilon_sweep(chart, mesh, lame, gap, p_exprs, eps_list, tol=1e-9, max_iter=200):
    """Solve the membrane limit once and the Koiter problem for every eps,
    reporting the V_M-norm distance between them on the shared nodal values."""
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 3:
        raise ArgumentError("the sweep needs at least 3 thickness values")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ArgumentError("eps_list must be strictly decreasing")
    for e in eps_list:
        _check_eps(e)
    mem = solve_membrane_limit(chart, mesh, lame, gap, p_exprs, tol, max_iter)
    prob = KoiterProblem(chart, mesh, lame, mem.gap, p_exprs)
    errors, iters, actives, solves = [], [], [], []
    for eps in eps_list:
        try:
            sol = prob.solve(eps, tol, max_iter)
        except KoiterviError as exc:
            raise type(exc)(f"eps={eps}: {exc}") from exc
        err = error_norms(mesh, sol.nodal, mem.nodal)
        log.info("eps=%g err_vm=%.6e iters=%d active=%d", eps, err.vm_norm,
                 sol.report.iterations, len(sol.report.active_set))
        errors.append(err)
        iters.append(sol.report.iterations)
        actives.append(len(sol.report.active_set))
        solves.append(sol)
    return SweepReport(eps_list, errors, iters, actives, mem, solves)


SWEEP_HEADER = ["epsilon", "err_vm", "err_h1_tan", "err_l2_trans", "iters", "active_count"]


def write_sweep_csv(report, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for eps, vm, h1, l2, it, na in report.rows():
            w.writerow([fmt_float(eps), fmt_float(vm), fmt_float(h1), fmt_float(l2),
                        it, na])


@dataclass(frozen=True)
class KornResult:
    lambda_min: float
    c0_estimate: float
    eigenvector: np.ndarray
    iterations: int


def korn_matrices(chart, mesh, lame):
    """Membrane stiffness and V_M norm matrix restricted to the free dofs."""
    dm = build_dofmap(mesh, MEMBRANE)
    A = assemble_membrane(mesh, dm, chart, lame, apply_bc=False)
    M = assemble_vm_norm_matrix(mesh)
    free = np.flatnonzero(dm.free_mask)
    return A[free][:, free].tocsr(), M[free][:, free].tocsr(), dm, free


def korn_constant(chart, mesh, lame, tol=1e-12, block=10, max_iter=500, rng_seed=0):
    """Smallest eigenvalue of A_M u = lambda M_VM u on the free MEMBRANE dofs.

    Uses block inverse iteration with CG inner solves and Rayleigh-Ritz
    projection. Before iterating, the constant transverse field
    ``(0, 0, 1)`` is tested: if it has (numerically) zero membrane energy,
    the Korn inequality fails and ``DegenerateKornError`` is raised with that
    field as the witness.

    Returns
    -------
    KornResult with ``c0_estimate = 1 / sqrt(lambda_min)``.
    """
    A, M, dm, free = korn_matrices(chart, mesh, lame)
    N = mesh.n_nodes
    witness = np.zeros(dm.n_dofs)
    witness[2 * N:] = 1.0
    wf = witness[free]
    ray = float(wf @ (A @ wf)) / float(wf @ (M @ wf))
    scale = abs(A).max()
    if ray <= 1e-12 * max(scale, 1.0):
        raise DegenerateKornError(
            f"degenerate Korn constant: the constant transverse field has "
            f"membrane energy ratio {ray:.3g} (surface is not elliptic)",
            lambda_min=ray, witness=witness)
    n = A.shape[0]
    k = min(block, n)
    rng = np.random.default_rng(rng_seed)
    X = rng.standard_normal((n, k))
    theta_old = None
    theta = np.ones(k)
    it = 0
    for it in range(1, max_iter + 1):
        MX = M @ X
        # X[:, j] / theta_j is already close to A^{-1} M X[:, j]: warm start
        Y = np.column_stack([solve_cg(A, MX[:, j], tol=1e-13 * max(1.0, np.abs(MX[:, j]).max()),
                                      max_iter=20 * n, x0=X[:, j] / theta[j])
                             for j in range(k)])
        Ar = Y.T @ (A @ Y)
        Mr = Y.T @ (M @ Y)
        theta, V = sla.eigh(0.5 * (Ar + Ar.T), 0.5 * (Mr + Mr.T))
        X = Y @ V
        X /= np.sqrt(np.einsum("ij,ij->j", X, M @ X))
        if theta_old is not None and abs(theta[0] - theta_old) <= tol * abs(theta[0]):
            break
        theta_old = theta[0]
    lam = float(theta[0])
    if lam <= 1e-12:
        raise DegenerateKornError(f"degenerate Korn constant: lambda_min={lam:.3g}",
                                  lambda_min=lam)
    vec = np.zeros(dm.n_dofs)
    vec[free] = X[:, 0]
    return KornResult(lam, 1.0 / np.sqrt(lam), vec, it)


def korn_dense(chart, mesh, lame):
    """Dense generalized eigensolve; an oracle for small meshes."""
    A, M, _, _ = korn_matrices(chart, mesh, lame)
    return float(sla.eigh(A.toarray(), M.toarray(), eigvals_only=True,
                          subset_by_index=[0, 0])[0])
