"""
Structured finite elements on the square (-c, c)^2.

Two discrete spaces are provided:

* ``MEMBRANE``: Q1 for all three components. The tangential components are
  clamped on the boundary, the transverse one is free everywhere.
* ``KOITER``: Q1 for the tangential components and the bicubic Hermite
  (Bogner-Fox-Schmit) element for the transverse one, with nodal dofs
  ``(w, d1 w, d2 w, d12 w)``. Everything is clamped on the boundary.

Global dof layout: ``eta1`` at ``[0, N)``, ``eta2`` at ``[N, 2N)``, then the
transverse block starting at ``2N`` (one dof per node for MEMBRANE, four per
node for KOITER, ``2N + 4*node + k``). Node ``(i, j)`` has index
``i + (nx + 1) * j`` where ``i`` counts along y1.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ArgumentError, ContractError, InfeasibleGapError
from .fieldexpr import eval_expr, parse_expr
from .geometry import eval_geometry, eval_geometry_derivatives
from .shell import elasticity_tensor, expand_fields, gamma_ab, rho_ab

__all__ = [
    "MEMBRANE",
    "KOITER",
    "Mesh",
    "DofMap",
    "GapField",
    "BoxQP",
    "build_mesh",
    "build_dofmap",
    "gauss_rule",
    "assemble_membrane",
    "assemble_flexural",
    "assemble_load",
    "assemble_gap_bounds",
    "make_gap_field",
    "apply_dirichlet",
    "assemble_vm_norm_matrix",
    "q1_matrices",
    "write_mesh",
    "write_matrix_coo",
]

MEMBRANE = "membrane"
KOITER = "koiter"

# quadrature points per direction
MEMBRANE_QUAD = 3
KOITER_QUAD = 4


@dataclass(frozen=True)
class Mesh:
    nx: int
    ny: int
    c: float
    nodes: np.ndarray            # (N, 2)
    cells: np.ndarray            # (nx*ny, 4), counterclockwise
    boundary_nodes: np.ndarray   # sorted indices

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def hx(self):
        return 2.0 * self.c / self.nx

    @property
    def hy(self):
        return 2.0 * self.c / self.ny

    def node_grid(self, values):
        """Reshape a nodal vector to a grid indexed ``[i, j]`` (i along y1)."""
        return np.asarray(values).reshape(self.ny + 1, self.nx + 1).T

    def cell_areas(self):
        p = self.nodes[self.cells]
        x, y = p[..., 0], p[..., 1]
        return 0.5 * np.sum(x * np.roll(y, -1, axis=1) - np.roll(x, -1, axis=1) * y, axis=1)


def build_mesh(chart, nx, ny=None):
    """Uniform quadrilateral grid of the chart square with nx x ny cells."""
    ny = nx if ny is None else ny
    if int(nx) != nx or int(ny) != ny or nx < 2 or ny < 2:
        raise ArgumentError(f"need at least 2 cells per direction, got {nx}x{ny}")
    nx, ny = int(nx), int(ny)
    c = chart.c if hasattr(chart, "c") else float(chart)
    t1 = np.linspace(-c, c, nx + 1)
    t2 = np.linspace(-c, c, ny + 1)
    Y1, Y2 = np.meshgrid(t1, t2, indexing="xy")
    nodes = np.column_stack([Y1.ravel(), Y2.ravel()])
    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    n0 = (i + (nx + 1) * j).ravel()
    cells = np.column_stack([n0, n0 + 1, n0 + nx + 2, n0 + nx + 1])
    ii = np.arange(nodes.shape[0]) % (nx + 1)
    jj = np.arange(nodes.shape[0]) // (nx + 1)
    bnd = np.flatnonzero((ii == 0) | (ii == nx) | (jj == 0) | (jj == ny))
    return Mesh(nx, ny, float(c), nodes, cells, bnd)


@dataclass(frozen=True)
class DofMap:
    space_kind: str
    mesh: Mesh
    n_dofs: int
    component_offsets: tuple
    clamped_mask: np.ndarray
    transverse_value_dofs: np.ndarray
    cell_dofs: np.ndarray        # (ncells, n_local)

    @property
    def free_mask(self):
        return ~self.clamped_mask

    def pack(self, eta1, eta2, eta3):
        """Assemble a global vector from nodal arrays.

        ``eta3`` has shape (N,) for MEMBRANE and (N, 4) for KOITER.
        """
        N = self.mesh.n_nodes
        u = np.zeros(self.n_dofs)
        u[:N] = eta1
        u[N:2 * N] = eta2
        u[2 * N:] = np.asarray(eta3, dtype=float).ravel()
        return u

    def nodal_components(self, u):
        """Nodal values (eta1, eta2, eta3), each of shape (N,)."""
        N = self.mesh.n_nodes
        u = np.asarray(u)
        return u[:N], u[N:2 * N], u[self.transverse_value_dofs]


def build_dofmap(mesh, space_kind):
    N = mesh.n_nodes
    cells = mesh.cells
    if space_kind == MEMBRANE:
        n_dofs = 3 * N
        cell_dofs = np.hstack([cells, cells + N, cells + 2 * N])
        tvd = 2 * N + np.arange(N)
        clamped = np.zeros(n_dofs, bool)
        clamped[mesh.boundary_nodes] = True
        clamped[mesh.boundary_nodes + N] = True
    elif space_kind == KOITER:
        n_dofs = 6 * N
        herm = (2 * N + 4 * cells[:, :, None] + np.arange(4)).reshape(len(cells), 16)
        cell_dofs = np.hstack([cells, cells + N, herm])
        tvd = 2 * N + 4 * np.arange(N)
        clamped = np.zeros(n_dofs, bool)
        b = mesh.boundary_nodes
        clamped[b] = True
        clamped[b + N] = True
        for k in range(4):
            clamped[2 * N + 4 * b + k] = True
    else:
        raise ArgumentError(f"unknown space kind {space_kind!r}")
    return DofMap(space_kind, mesh, n_dofs, (0, N, 2 * N), clamped, tvd, cell_dofs)


def gauss_rule(n):
    """Tensor Gauss-Legendre rule on the unit square [0, 1]^2.

    Returns
    -------
    pts : ndarray (n*n, 2)
    wts : ndarray (n*n,)
    """
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w)
    return np.column_stack([X1.ravel(), X2.ravel()]), W.ravel()


# corner order: (0,0), (1,0), (1,1), (0,1)
_CORNERS = np.array([[0, 0], [1, 0], [1, 1], [0, 1]])


def _lin(t, a):
    """1D linear shape function of node a in {0, 1}, value and derivative."""
    if a == 0:
        return 1.0 - t, -np.ones_like(t)
    return t, np.ones_like(t)


def _herm(t, a, k):
    """1D cubic Hermite shape: node a, k=0 value dof, k=1 slope dof.
    Returns value, first and second derivative in t."""
    if a == 0 and k == 0:
        return 1 - 3 * t ** 2 + 2 * t ** 3, -6 * t + 6 * t ** 2, -6 + 12 * t
    if a == 0 and k == 1:
        return t - 2 * t ** 2 + t ** 3, 1 - 4 * t + 3 * t ** 2, -4 + 6 * t
    if a == 1 and k == 0:
        return 3 * t ** 2 - 2 * t ** 3, 6 * t - 6 * t ** 2, 6 - 12 * t
    return -t ** 2 + t ** 3, -2 * t + 3 * t ** 2, -2 + 6 * t


def q1_basis(pts, hx, hy):
    """Q1 values (nq, 4) and physical gradients (nq, 4, 2)."""
    nq = len(pts)
    val = np.empty((nq, 4))
    grad = np.empty((nq, 4, 2))
    for a, (ca, cb) in enumerate(_CORNERS):
        fx, dfx = _lin(pts[:, 0], ca)
        fy, dfy = _lin(pts[:, 1], cb)
        val[:, a] = fx * fy
        grad[:, a, 0] = dfx * fy / hx
        grad[:, a, 1] = fx * dfy / hy
    return val, grad


def hermite_basis(pts, hx, hy):
    """BFS values (nq, 16), gradients (nq, 16, 2), Hessians (nq, 16, 2, 2).

    Local order: corner-major, then (w, d1 w, d2 w, d12 w).
    """
    nq = len(pts)
    val = np.empty((nq, 16))
    grad = np.empty((nq, 16, 2))
    hess = np.empty((nq, 16, 2, 2))
    for a, (ca, cb) in enumerate(_CORNERS):
        for k, (kx, ky) in enumerate([(0, 0), (1, 0), (0, 1), (1, 1)]):
            fx, dfx, ddfx = _herm(pts[:, 0], ca, kx)
            fy, dfy, ddfy = _herm(pts[:, 1], cb, ky)
            scale = (hx if kx else 1.0) * (hy if ky else 1.0)
            i = 4 * a + k
            val[:, i] = scale * fx * fy
            grad[:, i, 0] = scale * dfx * fy / hx
            grad[:, i, 1] = scale * fx * dfy / hy
            hess[:, i, 0, 0] = scale * ddfx * fy / hx ** 2
            hess[:, i, 1, 1] = scale * fx * ddfy / hy ** 2
            hess[:, i, 0, 1] = hess[:, i, 1, 0] = scale * dfx * dfy / (hx * hy)
    return val, grad, hess


@dataclass
class _ElementBasis:
    pts: np.ndarray      # reference points (nq, 2)
    wts: np.ndarray      # physical weights (nq,)
    vals: np.ndarray     # (nq, nld, 3)
    grads: np.ndarray    # (nq, nld, 3, 2)
    hess3: np.ndarray    # (nq, nld, 2, 2) or None


def element_basis(dofmap, nquad=None):
    """Vector-valued local basis of one cell, shared by all cells."""
    mesh = dofmap.mesh
    if nquad is None:
        nquad = KOITER_QUAD if dofmap.space_kind == KOITER else MEMBRANE_QUAD
    pts, wts = gauss_rule(nquad)
    hx, hy = mesh.hx, mesh.hy
    qv, qg = q1_basis(pts, hx, hy)
    nq = len(pts)
    if dofmap.space_kind == MEMBRANE:
        nld = 12
        vals = np.zeros((nq, nld, 3))
        grads = np.zeros((nq, nld, 3, 2))
        for comp in range(3):
            vals[:, 4 * comp:4 * comp + 4, comp] = qv
            grads[:, 4 * comp:4 * comp + 4, comp] = qg
        hess3 = None
    else:
        hv, hg, hh = hermite_basis(pts, hx, hy)
        nld = 24
        vals = np.zeros((nq, nld, 3))
        grads = np.zeros((nq, nld, 3, 2))
        hess3 = np.zeros((nq, nld, 2, 2))
        for comp in range(2):
            vals[:, 4 * comp:4 * comp + 4, comp] = qv
            grads[:, 4 * comp:4 * comp + 4, comp] = qg
        vals[:, 8:, 2] = hv
        grads[:, 8:, 2] = hg
        hess3[:, 8:] = hh
    return _ElementBasis(pts, wts * hx * hy, vals, grads, hess3)


def quadrature_points(mesh, pts):
    """Physical coordinates (ncells, nq, 2) of reference points in every cell."""
    origin = mesh.nodes[mesh.cells[:, 0]]
    return origin[:, None, :] + pts[None, :, :] * np.array([mesh.hx, mesh.hy])


def _scatter(dofmap, Ke):
    cd = dofmap.cell_dofs
    rows = np.repeat(cd, cd.shape[1], axis=1).ravel()
    cols = np.tile(cd, (1, cd.shape[1])).ravel()
    A = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(dofmap.n_dofs,) * 2).tocsr()
    A.sum_duplicates()
    return A


def apply_dirichlet(A, clamped_mask):
    """Zero clamped rows and columns, put 1 on their diagonal."""
    keep = sp.diags((~clamped_mask).astype(float))
    A = keep @ A @ keep + sp.diags(clamped_mask.astype(float))
    A = A.tocsr()
    A.eliminate_zeros()
    return A


def _strain_setup(dofmap, chart, nquad):
    basis = element_basis(dofmap, nquad)
    Y = quadrature_points(dofmap.mesh, basis.pts)
    geom = eval_geometry(chart, Y)
    return basis, Y, geom


def assemble_membrane(mesh, dofmap, chart, lame, apply_bc=True, nquad=None):
    """Stiffness matrix of the membrane form int a^{abst} gamma_st(u) gamma_ab(v) sqrt(a).

    Returns
    -------
    scipy.sparse.csr_matrix (n_dofs x n_dofs)
    """
    _check_mesh(mesh, dofmap)
    basis, Y, geom = _strain_setup(dofmap, chart, nquad)
    g = gamma_ab(expand_fields(geom, 2), basis.vals, basis.grads).gamma
    a = elasticity_tensor(geom, lame).comp
    Ke = _form_element_matrices(a, g, basis.wts * geom.sqrt_a)
    A = _scatter(dofmap, Ke)
    return apply_dirichlet(A, dofmap.clamped_mask) if apply_bc else A


def assemble_flexural(mesh, dofmap, chart, lame, apply_bc=True, nquad=None):
    """Stiffness matrix of the bending form (1/3) int a^{abst} rho_st(u) rho_ab(v) sqrt(a)."""
    _check_mesh(mesh, dofmap)
    if dofmap.space_kind != KOITER:
        raise ContractError("the bending form needs the KOITER space")
    basis, Y, geom = _strain_setup(dofmap, chart, nquad)
    der = eval_geometry_derivatives(chart, Y, geom)
    r = rho_ab(expand_fields(geom, 2), expand_fields(der, 2),
               basis.vals, basis.grads, basis.hess3).rho
    a = elasticity_tensor(geom, lame).comp
    Ke = _form_element_matrices(a, r, basis.wts * geom.sqrt_a) / 3.0
    A = _scatter(dofmap, Ke)
    return apply_dirichlet(A, dofmap.clamped_mask) if apply_bc else A


def _form_element_matrices(a, strain, weights):
    # strain (c, q, j, 2, 2); a (c, q, 2, 2, 2, 2); weights (c, q)
    sv = _voigt(strain)                                   # (c, q, j, 3)
    D = _voigt_tensor(a) * weights[..., None, None]       # (c, q, 3, 3)
    T = np.einsum("cqkl,cqjl->cqjk", D, sv)
    Ke = np.einsum("cqik,cqjk->cij", sv, T)
    return 0.5 * (Ke + np.swapaxes(Ke, 1, 2))


def _voigt(t):
    return np.stack([t[..., 0, 0], t[..., 1, 1], t[..., 0, 1]], axis=-1)


def _voigt_tensor(a):
    """3x3 matrix D with a^{abst} s_st t_ab = voigt(t) . D voigt(s)."""
    idx = [(0, 0), (1, 1), (0, 1)]
    mult = [1.0, 1.0, 2.0]
    D = np.empty(a.shape[:-4] + (3, 3))
    for i, (p, q) in enumerate(idx):
        for j, (s, t) in enumerate(idx):
            D[..., i, j] = mult[i] * mult[j] * a[..., p, q, s, t]
    return D


def assemble_load(mesh, dofmap, chart, p_exprs, nquad=None):
    """Load vector f with f . v = int p^i v_i sqrt(a); clamped entries are 0."""
    _check_mesh(mesh, dofmap)
    exprs = [parse_expr(p) for p in p_exprs]
    if len(exprs) != 3:
        raise ArgumentError("need three load components")
    basis, Y, geom = _strain_setup(dofmap, chart, nquad)
    P = np.stack([eval_expr(e, (Y[..., 0], Y[..., 1])) for e in exprs], axis=-1)
    w = basis.wts * geom.sqrt_a                               # (c, q)
    fe = np.einsum("cq,cqi,qji->cj", w, P, basis.vals)
    f = np.zeros(dofmap.n_dofs)
    np.add.at(f, dofmap.cell_dofs.ravel(), fe.ravel())
    f[dofmap.clamped_mask] = 0.0
    return f


@dataclass(frozen=True)
class GapField:
    expr: object
    node_values: np.ndarray


def make_gap_field(expr, mesh):
    """Sample the gap s(y) at the mesh nodes."""
    e = parse_expr(expr)
    vals = eval_expr(e, (mesh.nodes[:, 0], mesh.nodes[:, 1]))
    return GapField(e, np.asarray(vals, dtype=float))


def assemble_gap_bounds(dofmap, gap):
    """Lower bounds: -s at transverse value dofs, -inf elsewhere."""
    s = np.asarray(gap.node_values, dtype=float)
    if s.shape != (dofmap.mesh.n_nodes,):
        raise ArgumentError("gap values must be sampled at every node")
    if not np.all(np.isfinite(s)) or np.any(s <= 0):
        k = int(np.argmin(np.where(np.isfinite(s), s, -np.inf)))
        y = dofmap.mesh.nodes[k]
        raise InfeasibleGapError(
            f"gap must be positive, found s={s[k]:.6g} at node {k} "
            f"y=({y[0]:.6g}, {y[1]:.6g})")
    lower = np.full(dofmap.n_dofs, -np.inf)
    lower[dofmap.transverse_value_dofs] = -s
    return lower


@dataclass
class BoxQP:
    """minimize 1/2 u.Au - f.u subject to u >= lower, u = 0 on clamped dofs."""

    A: sp.spmatrix
    f: np.ndarray
    lower: np.ndarray
    free_mask: np.ndarray = field(default=None)

    def __post_init__(self):
        self.A = sp.csr_matrix(self.A)
        self.f = np.asarray(self.f, dtype=float)
        n = self.f.shape[0]
        self.lower = (np.full(n, -np.inf) if self.lower is None
                      else np.asarray(self.lower, dtype=float))
        if self.free_mask is None:
            self.free_mask = np.ones(n, bool)
        self.free_mask = np.asarray(self.free_mask, bool)
        if self.A.shape != (n, n) or self.lower.shape != (n,):
            raise ArgumentError("inconsistent BoxQP dimensions")

    def objective(self, u):
        return 0.5 * u @ (self.A @ u) - self.f @ u


def q1_matrices(mesh, nquad=3):
    """Flat Q1 stiffness (Laplacian) and mass matrices on the node grid."""
    pts, wts = gauss_rule(nquad)
    v, g = q1_basis(pts, mesh.hx, mesh.hy)
    w = wts * mesh.hx * mesh.hy
    Me = np.einsum("q,qi,qj->ij", w, v, v)
    Ke = np.einsum("q,qik,qjk->ij", w, g, g)
    cells = mesh.cells
    rows = np.repeat(cells, 4, axis=1).ravel()
    cols = np.tile(cells, (1, 4)).ravel()
    N = mesh.n_nodes
    nc = len(cells)
    M = sp.coo_matrix((np.tile(Me.ravel(), nc), (rows, cols)), shape=(N, N)).tocsr()
    K = sp.coo_matrix((np.tile(Ke.ravel(), nc), (rows, cols)), shape=(N, N)).tocsr()
    return K, M


def assemble_vm_norm_matrix(mesh, dofmap=None):
    """Block matrix of the norm sum_a |eta_a|_{H1}^2 + |eta_3|_{L2}^2 on the
    Q1 nodal space (3N x 3N), with the flat measure dy."""
    K, M = q1_matrices(mesh)
    return sp.block_diag([K + M, K + M, M]).tocsr()


def write_mesh(mesh, path_prefix):
    """Write ``<prefix>_nodes.txt`` ("index y1 y2") and ``<prefix>_cells.txt``
    ("index n0 n1 n2 n3")."""
    with open(f"{path_prefix}_nodes.txt", "w") as fh:
        fh.write("# index y1 y2\n")
        for k, (a, b) in enumerate(mesh.nodes):
            fh.write(f"{k} {a:.17g} {b:.17g}\n")
    with open(f"{path_prefix}_cells.txt", "w") as fh:
        fh.write("# index n0 n1 n2 n3\n")
        for k, c in enumerate(mesh.cells):
            fh.write(f"{k} {c[0]} {c[1]} {c[2]} {c[3]}\n")


def write_matrix_coo(A, path):
    """Write a sparse matrix as "row col value" lines, sorted by (row, col)."""
    C = sp.coo_matrix(A)
    order = np.lexsort((C.col, C.row))
    with open(path, "w") as fh:
        fh.write(f"# {C.shape[0]} {C.shape[1]} {C.nnz}\n")
        for k in order:
            fh.write(f"{C.row[k]} {C.col[k]} {C.data[k]:.17g}\n")


def _check_mesh(mesh, dofmap):
    if mesh is not dofmap.mesh and (mesh.nx, mesh.ny, mesh.c) != (
            dofmap.mesh.nx, dofmap.mesh.ny, dofmap.mesh.c):
        raise ArgumentError("dof map was built for a different mesh")
