"""
Grid tools for interior regularity: difference quotients, an
obstacle-preserving second-difference perturbation, a local convexifying
factor for non-concave gaps, a cutoff-plus-mollifier density construction,
and a probe that tracks difference quotients of a computed membrane solution.

Grid values are stored as ``values[i, j]`` at ``(origin[0] + i*h0,
origin[1] + j*h0)``.
"""

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import (ArgumentError, ConvexifierSearchError, DomainError,
                     PreconditionError)
from .fieldexpr import eval_expr, parse_expr
from .report import fmt_float

__all__ = [
    "GridField",
    "Convexifier",
    "diff_forward",
    "diff_backward",
    "diff_second",
    "shift",
    "common_restrict",
    "feasible_perturbation",
    "build_convexifier",
    "convexifier_hessian",
    "density_approximant",
    "bump_cutoff",
    "grid_l2",
    "grid_h1",
    "interior_regularity_probe",
    "write_probe_csv",
]


@dataclass(frozen=True)
class GridField:
    """Scalar samples on a uniform grid covering (part of) the square (-c, c)^2."""

    values: np.ndarray
    h0: float
    origin: tuple
    c: float = 0.5

    @classmethod
    def from_function(cls, func, c, n):
        """Sample ``func(y1, y2)`` on the (n+1) x (n+1) node grid of (-c, c)^2."""
        t = np.linspace(-c, c, n + 1)
        Y1, Y2 = np.meshgrid(t, t, indexing="ij")
        vals = func(Y1, Y2) if callable(func) else eval_expr(func, (Y1, Y2))
        vals = np.broadcast_to(np.asarray(vals, dtype=float), Y1.shape).copy()
        return cls(vals, 2.0 * c / n, (-c, -c), c)

    @property
    def shape(self):
        return self.values.shape

    def coords(self):
        n1, n2 = self.values.shape
        y1 = self.origin[0] + self.h0 * np.arange(n1)
        y2 = self.origin[1] + self.h0 * np.arange(n2)
        return np.meshgrid(y1, y2, indexing="ij")

    def with_values(self, values):
        return replace(self, values=np.asarray(values, dtype=float))

    def boundary_distance(self):
        Y1, Y2 = self.coords()
        return self.c - np.maximum(np.abs(Y1), np.abs(Y2))

    def _index_offset(self, other):
        off = [(o2 - o1) / self.h0 for o1, o2 in zip(self.origin, other.origin)]
        r = [int(round(x)) for x in off]
        if any(abs(a - b) > 1e-6 for a, b in zip(off, r)) or \
                not math.isclose(self.h0, other.h0, rel_tol=1e-12):
            raise ArgumentError("grid fields are not aligned")
        return r


def _steps(field, h):
    k = h / field.h0
    kr = int(round(k))
    if kr < 1 or abs(k - kr) > 1e-9 * max(1.0, k):
        raise ArgumentError(f"increment h={h} must be a positive integer multiple "
                            f"of the grid spacing {field.h0}")
    return kr


def _axis(rho):
    if rho not in (1, 2):
        raise ArgumentError("direction must be 1 or 2")
    return rho - 1


def _take(values, axis, start, stop):
    sl = [slice(None)] * 2
    sl[axis] = slice(start, stop)
    return values[tuple(sl)]


def _shifted_origin(field, axis, k):
    o = list(field.origin)
    o[axis] += k * field.h0
    return tuple(o)


def diff_forward(field, rho, h):
    """D_{rho h} xi(y) = (xi(y + h e_rho) - xi(y)) / h on the points whose
    stencil stays in the grid."""
    ax = _axis(rho)
    k = _steps(field, h)
    n = field.values.shape[ax]
    if k >= n:
        raise DomainError("difference stencil leaves the grid")
    v = field.values
    out = (_take(v, ax, k, n) - _take(v, ax, 0, n - k)) / (k * field.h0)
    return GridField(out, field.h0, field.origin, field.c)


def diff_backward(field, rho, h):
    """D_{-rho h} xi(y) = (xi(y) - xi(y - h e_rho)) / h."""
    ax = _axis(rho)
    k = _steps(field, h)
    n = field.values.shape[ax]
    if k >= n:
        raise DomainError("difference stencil leaves the grid")
    v = field.values
    out = (_take(v, ax, k, n) - _take(v, ax, 0, n - k)) / (k * field.h0)
    return GridField(out, field.h0, _shifted_origin(field, ax, k), field.c)


def diff_second(field, rho, h):
    """delta_{rho h} xi(y) = (xi(y+h e) - 2 xi(y) + xi(y-h e)) / h^2."""
    ax = _axis(rho)
    k = _steps(field, h)
    n = field.values.shape[ax]
    if 2 * k >= n:
        raise DomainError("second difference stencil leaves the grid")
    v = field.values
    hh = k * field.h0
    out = (_take(v, ax, 2 * k, n) - 2.0 * _take(v, ax, k, n - k)
           + _take(v, ax, 0, n - 2 * k)) / hh ** 2
    return GridField(out, field.h0, _shifted_origin(field, ax, k), field.c)


def shift(field, rho, h):
    """E_{rho h} w(y) = w(y + h e_rho) (h may be negative)."""
    ax = _axis(rho)
    k = _steps(field, abs(h))
    n = field.values.shape[ax]
    if k >= n:
        raise DomainError("shift leaves the grid")
    if h > 0:
        return GridField(_take(field.values, ax, k, n), field.h0, field.origin, field.c)
    return GridField(_take(field.values, ax, 0, n - k), field.h0,
                     _shifted_origin(field, ax, k), field.c)


def common_restrict(*fields):
    """Restrict aligned fields to their common rectangle."""
    lo = [max(f.origin[a] for f in fields) for a in range(2)]
    hi = [min(f.origin[a] + f.h0 * (f.values.shape[a] - 1) for f in fields)
          for a in range(2)]
    out = []
    for f in fields:
        i0 = [int(round((lo[a] - f.origin[a]) / f.h0)) for a in range(2)]
        n = [int(round((hi[a] - lo[a]) / f.h0)) + 1 for a in range(2)]
        if min(n) < 1:
            raise DomainError("fields do not overlap")
        vals = f.values[i0[0]:i0[0] + n[0], i0[1]:i0[1] + n[1]]
        out.append(GridField(vals, f.h0, (lo[0], lo[1]), f.c))
    return out


def feasible_perturbation(eta3, s_tilde, phi1, rho, h, rho_coeff, tol=1e-12):
    """Return eta3 + rho_coeff * phi1 * delta_{rho h} eta3.

    The update is a convex combination of eta3 at y - h e, y, y + h e when
    ``rho_coeff < h^2 / 2`` and ``0 <= phi1 <= 1``; with a gap that is
    concave where ``phi1 > 0`` the constraint ``s_tilde + eta3 >= 0`` is kept.

    Raises
    ------
    ArgumentError
        ``rho_coeff`` outside (0, h^2/2), or ``phi1`` outside [0, 1].
    PreconditionError
        Infeasible input, nonzero cutoff where the stencil leaves the grid, or
        a positive second difference of the gap where ``phi1 > 0``.
    """
    k = _steps(eta3, h)
    hh = k * eta3.h0
    if not 0 < rho_coeff < 0.5 * hh ** 2:
        raise ArgumentError(f"coefficient must lie in (0, h^2/2) = (0, {0.5 * hh ** 2:.6g})")
    for f in (s_tilde, phi1):
        if f.values.shape != eta3.values.shape or f.origin != eta3.origin:
            raise ArgumentError("fields must share the same grid")
    phi = phi1.values
    if np.any(phi < 0) or np.any(phi > 1):
        raise ArgumentError("cutoff must take values in [0, 1]")
    if np.any(s_tilde.values + eta3.values < -tol):
        raise PreconditionError("input violates s_tilde + eta3 >= 0")
    ax = _axis(rho)
    n = eta3.values.shape[ax]
    interior = np.zeros(eta3.values.shape, bool)
    sl = [slice(None)] * 2
    sl[ax] = slice(k, n - k)
    interior[tuple(sl)] = True
    if np.any(phi[~interior] != 0):
        raise PreconditionError("cutoff must vanish where the stencil leaves the grid")
    d_s = np.zeros_like(eta3.values)
    d_s[tuple(sl)] = diff_second(s_tilde, rho, hh).values
    support = phi > 0
    if np.any(d_s[support] > 0):
        raise PreconditionError("gap is not concave on the cutoff support "
                                "(positive second difference)")
    c1 = rho_coeff / hh ** 2 * phi
    # written as the convex combination so that rounding cannot break the bound
    out = eta3.values.copy()
    vals = eta3.values
    plus = np.zeros_like(vals)
    minus = np.zeros_like(vals)
    plus[tuple(sl)] = _take(vals, ax, 2 * k, n)
    minus[tuple(sl)] = _take(vals, ax, 0, n - 2 * k)
    out[support] = (c1 * plus + (1.0 - 2.0 * c1) * vals + c1 * minus)[support]
    result = eta3.with_values(out)
    margin = s_tilde.values + out
    if np.any(margin[support] < -tol):
        raise PreconditionError(
            f"perturbed field infeasible by {-margin[support].min():.3g}")
    return result


@dataclass(frozen=True)
class Convexifier:
    """Factor g(y) = 1 - Pi(y)/2, Pi(y) = exp(r (y1 - y01) + r (y2 - y02)),
    making (-s + B) g convex on the square U of half-width ``U_halfwidth``."""

    y0: tuple
    r: float
    B: float
    B0: float
    U_halfwidth: float
    T: float
    M: float
    min_eig: float
    g_min: float
    p1: float

    def g(self, y1, y2):
        return 1.0 - 0.5 * np.exp(self.r * (y1 - self.y0[0]) + self.r * (y2 - self.y0[1]))

    def U_grid(self, n=33):
        t1 = self.y0[0] + np.linspace(-self.U_halfwidth, self.U_halfwidth, n)
        t2 = self.y0[1] + np.linspace(-self.U_halfwidth, self.U_halfwidth, n)
        return np.meshgrid(t1, t2, indexing="ij")


def _gap_derivatives(expr):
    e = parse_expr(expr)
    d1, d2 = e.diff("y1"), e.diff("y2")
    return e, (d1, d2), ((d1.diff("y1"), d1.diff("y2")), (d2.diff("y1"), d2.diff("y2")))


def _eval(e, Y1, Y2):
    return np.broadcast_to(eval_expr(e, (Y1, Y2)), Y1.shape)


def convexifier_hessian(s_expr, y0, r, B, Y1, Y2):
    """Hessian (..., 2, 2) of (-s + B) g at the given points, from exact
    symbolic derivatives of s."""
    e, grad, hess = _gap_derivatives(s_expr)
    s = _eval(e, Y1, Y2)
    gs = np.stack([_eval(g, Y1, Y2) for g in grad], axis=-1)
    Hs = np.stack([np.stack([_eval(hess[a][b], Y1, Y2) for b in range(2)], -1)
                   for a in range(2)], -2)
    Pi = np.exp(r * (Y1 - y0[0]) + r * (Y2 - y0[1]))
    g = 1.0 - 0.5 * Pi
    gg = -0.5 * r * Pi[..., None] * np.ones(2)
    Hg = -0.5 * r ** 2 * Pi[..., None, None] * np.ones((2, 2))
    return (-Hs * g[..., None, None]
            - gs[..., :, None] * gg[..., None, :]
            - gg[..., :, None] * gs[..., None, :]
            + (B - s)[..., None, None] * Hg)


def build_convexifier(s_expr, y0, c=0.5, n_sample=65, n_check=33,
                      max_r_exp=20, max_b_steps=20, psd_tol=1e-10):
    """Search the shift B and rate r making (-s + B) g convex near y0.

    T = min(s - B) and M = max(|Hess s|_2, sqrt(2)|grad s|) are sampled on an
    n_sample x n_sample grid of the closed square. For each B in
    0, -1, -3, -7, ... and r = 1, 2, 4, ..., 2^max_r_exp, U is the square of
    half-width ln(3/2)/(2r) around y0; the pair is accepted when U lies in the
    open square and the Hessian sampled on n_check x n_check points of U has
    eigenvalues >= -psd_tol. The quadratic p1(r) = (T/2)(v1+v2)^2 r^2 - M r - M
    along the diagonal direction v = (1, 1)/sqrt(2) is recorded for reference;
    directions with v1 + v2 = 0 receive no help from r, so acceptance rests on
    the sampled Hessian.

    Raises
    ------
    PreconditionError
        If s is not positive on the sampled closed square.
    ConvexifierSearchError
        If no (B, r) pair passes, reporting the sampled M and T.
    """
    e = parse_expr(s_expr)
    y0 = (float(y0[0]), float(y0[1]))
    if max(abs(y0[0]), abs(y0[1])) >= c:
        raise DomainError("y0 must lie in the open square")
    t = np.linspace(-c, c, n_sample)
    S1, S2 = np.meshgrid(t, t, indexing="ij")
    _, grad, hess = _gap_derivatives(e)
    s = _eval(e, S1, S2)
    if not np.all(s > 0):
        raise PreconditionError("gap must be positive on the closed square")
    gs = np.stack([_eval(g, S1, S2) for g in grad], axis=-1)
    Hs = np.stack([np.stack([_eval(hess[a][b], S1, S2) for b in range(2)], -1)
                   for a in range(2)], -2)
    M = float(max(np.max(np.linalg.norm(Hs, ord=2, axis=(-2, -1))),
                  math.sqrt(2.0) * np.max(np.linalg.norm(gs, axis=-1))))
    B = 0.0
    T = float(np.min(s) - B)
    for ib in range(max_b_steps + 1):
        B = -(2.0 ** ib - 1.0)
        T = float(np.min(s) - B)
        for ir in range(max_r_exp + 1):
            r = 2.0 ** ir
            hw = math.log(1.5) / (2.0 * r)
            if max(abs(y0[0]), abs(y0[1])) + hw >= c:
                continue
            U1, U2 = np.meshgrid(y0[0] + np.linspace(-hw, hw, n_check),
                                 y0[1] + np.linspace(-hw, hw, n_check), indexing="ij")
            H = convexifier_hessian(e, y0, r, B, U1, U2)
            min_eig = float(np.min(np.linalg.eigvalsh(H)))
            Pi = np.exp(r * (U1 - y0[0]) + r * (U2 - y0[1]))
            g_min = float(np.min(1.0 - 0.5 * Pi))
            if min_eig >= -psd_tol and g_min >= 0.25:
                p1 = T * r ** 2 - M * r - M
                return Convexifier(y0, r, B, 0.25, hw, T, M, min_eig, g_min, p1)
    raise ConvexifierSearchError(
        f"no shift/rate pair made the product convex (M={M:.6g}, T={T:.6g})", M=M, T=T)


def _bump_weights(radius, h0):
    m = int(math.floor(radius / h0))
    z = h0 * np.arange(-m, m + 1)
    Z1, Z2 = np.meshgrid(z, z, indexing="ij")
    q = (Z1 ** 2 + Z2 ** 2) / radius ** 2
    w = np.where(q < 1.0, np.exp(-1.0 / np.where(q < 1.0, 1.0 - q, 1.0)), 0.0)
    return w / w.sum()


def _convolve_zero_padded(values, w):
    m = w.shape[0] // 2
    if m == 0:
        return values.copy()
    padded = np.pad(values, m)
    out = np.zeros_like(values)
    n1, n2 = values.shape
    for a in range(w.shape[0]):
        for b in range(w.shape[1]):
            if w[a, b] != 0.0:
                out += w[a, b] * padded[a:a + n1, b:b + n2]
    return out


def density_approximant(eta, k, s):
    """Smooth, compactly supported approximation of a feasible transverse field.

    Step one multiplies eta3 by (1 - 1/k) f_k, where f_k is 0 within 1/k of
    the boundary, rises linearly to 1 at distance 2/k and is 1 beyond. Step
    two convolves with a normalised discrete bump of radius 1/(2k).

    Parameters
    ----------
    eta : tuple (eta1, eta2, eta3) of GridField
        Tangential components are returned unchanged.
    k : int >= 1
    s : float, ndarray or GridField
        Gap on the same grid, with positive minimum.

    Returns
    -------
    tuple of GridField
    """
    if int(k) != k or k < 1:
        raise ArgumentError("k must be a positive integer")
    eta1, eta2, eta3 = eta
    s_vals = s.values if isinstance(s, GridField) else np.broadcast_to(
        np.asarray(s, dtype=float), eta3.values.shape)
    s_min = float(np.min(s_vals))
    if not s_min > 0:
        raise PreconditionError("gap must have a positive minimum")
    dist = eta3.boundary_distance()
    fk = np.clip(k * dist - 1.0, 0.0, 1.0)
    cut = (1.0 - 1.0 / k) * fk * eta3.values
    w = _bump_weights(0.5 / k, eta3.h0)
    smooth = _convolve_zero_padded(cut, w)
    return eta1, eta2, eta3.with_values(smooth)


def grid_l2(field):
    """Trapezoid-rule L2 norm of a grid field."""
    v = field.values
    w1 = np.ones(v.shape[0])
    w2 = np.ones(v.shape[1])
    w1[[0, -1]] = 0.5
    w2[[0, -1]] = 0.5
    return float(np.sqrt(field.h0 ** 2 * np.einsum("i,j,ij->", w1, w2, v ** 2)))


def grid_h1(field):
    """Discrete H1 norm: L2 of the field plus L2 of its central-difference gradient."""
    v = field.values
    if min(v.shape) < 2:
        return grid_l2(field)
    g1, g2 = np.gradient(v, field.h0)
    total = grid_l2(field) ** 2 + grid_l2(field.with_values(g1)) ** 2 + \
        grid_l2(field.with_values(g2)) ** 2
    return float(np.sqrt(total))


def bump_cutoff(center, halfwidth):
    """C^1 cutoff prod cos^2(pi (y - center) / (2 halfwidth)) on the patch, 0 outside."""
    def phi(Y1, Y2):
        out = np.ones_like(Y1, dtype=float)
        for Y, cc in ((Y1, center[0]), (Y2, center[1])):
            x = (Y - cc) / halfwidth
            out = out * np.where(np.abs(x) < 1.0, np.cos(0.5 * np.pi * x) ** 2, 0.0)
        return out
    return phi


@dataclass
class ProbeTable:
    rows: list                   # (h, rho, norm_h1_tan, norm_l2_trans)
    ratios: dict                 # rho -> max/min of the combined norm over h

    def combined(self, rho):
        return [math.hypot(r[2], r[3]) for r in self.rows if r[1] == rho]


def interior_regularity_probe(zeta, patch, cutoff=None, levels=3):
    """Norms of D_{rho h}(phi zeta) in H1 x H1 x L2 for h = h0, 2 h0, 4 h0, ...

    Parameters
    ----------
    zeta : ShellSolve or tuple (mesh, (eta1, eta2, eta3) nodal arrays)
    patch : (center, halfwidth) of the interior square
    cutoff : callable phi(Y1, Y2), default ``bump_cutoff(*patch)``

    Raises
    ------
    DomainError
        When the patch is closer than 4 * max h to the boundary.
    """
    if hasattr(zeta, "dofmap"):
        mesh = zeta.dofmap.mesh
        nodal = zeta.nodal
    else:
        mesh, nodal = zeta
    center, halfwidth = patch
    h0 = mesh.hx
    hs = [h0 * 2 ** j for j in range(levels)]
    margin = mesh.c - (max(abs(center[0]), abs(center[1])) + halfwidth)
    if margin < 4 * max(hs) - 1e-12:
        raise DomainError(f"patch margin {margin:.4g} is below 4*max(h) = {4 * max(hs):.4g}")
    phi_fun = cutoff if cutoff is not None else bump_cutoff(center, halfwidth)
    comps = []
    for v in nodal:
        g = GridField(mesh.node_grid(v), h0, (-mesh.c, -mesh.c), mesh.c)
        Y1, Y2 = g.coords()
        comps.append(g.with_values(phi_fun(Y1, Y2) * g.values))
    rows = []
    ratios = {}
    for rho in (1, 2):
        comb = []
        for h in hs:
            d = [diff_forward(g, rho, h) for g in comps]
            n_tan = math.sqrt(grid_h1(d[0]) ** 2 + grid_h1(d[1]) ** 2)
            n_tr = grid_l2(d[2])
            rows.append((h, rho, n_tan, n_tr))
            comb.append(math.hypot(n_tan, n_tr))
        ratios[rho] = max(comb) / min(comb) if min(comb) > 0 else (1.0 if max(comb) == 0 else math.inf)
    return ProbeTable(rows, ratios)


PROBE_HEADER = ["h", "rho", "norm_h1_tan", "norm_l2_trans"]


def write_probe_csv(table, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PROBE_HEADER)
        for h, rho, a, b in table.rows:
            w.writerow([fmt_float(h), rho, fmt_float(a), fmt_float(b)])
