"""
Differential geometry of graph surfaces y -> (y1, y2, f(y)) over a square.

Every quantity is computed from exact derivatives of f up to third order, so
downstream tests never see numerical-differentiation error. All evaluators
accept ``y`` with arbitrary leading shape ``(..., 2)`` and return arrays with
the same leading shape.

Index conventions for stored arrays (leading axes omitted):

* ``a_cov[alpha, :]``            covariant basis vector a_alpha
* ``a_con[alpha, :]``            contravariant basis vector a^alpha
* ``b_mixed[alpha, beta]``       mixed curvature b^beta_alpha
* ``christoffel[sigma, a, b]``   Gamma^sigma_{ab}
* ``d_*[gamma, ...]``            partial derivative d_gamma of the field
"""

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, DomainError, ImmersionError, NonEllipticError

__all__ = [
    "Chart",
    "GeometryPointData",
    "GeometryDerivatives",
    "ScaledVolumeData",
    "eval_geometry",
    "eval_geometry_derivatives",
    "assert_elliptic",
    "eval_scaled_tensors",
    "MIN_RADICAND",
    "MAX_EPS",
]

# graph charts must keep 1 - sum(y_a^2 / A_a^2) above this on the closed square
MIN_RADICAND = 0.01
MAX_EPS = 0.3
_DOMAIN_TOL = 1e-12


@dataclass(frozen=True)
class Chart:
    """Analytic graph chart over the square (-c, c)^2.

    ``kind`` is ``"sphere"``, ``"ellipsoid"`` or ``"plate"``. Sphere and
    ellipsoid charts describe the lower half of the surface, so the unit
    normal ``a3`` points up, toward the centre.
    """

    kind: str
    semiaxes: tuple = (1.0, 1.0, 1.0)
    c: float = 0.5

    def __post_init__(self):
        if self.kind not in ("sphere", "ellipsoid", "plate"):
            raise ArgumentError(f"unknown chart kind {self.kind!r}")
        if not (np.isfinite(self.c) and self.c > 0):
            raise ArgumentError("half-width c must be positive")
        if self.kind != "plate":
            A1, A2, A3 = self.semiaxes
            if min(A1, A2, A3) <= 0:
                raise ArgumentError("semiaxes must be positive")
            q_min = 1.0 - self.c ** 2 / A1 ** 2 - self.c ** 2 / A2 ** 2
            if q_min < MIN_RADICAND - 1e-14:
                raise ArgumentError(
                    f"half-width c={self.c} leaves radicand {q_min:.4g} < "
                    f"{MIN_RADICAND} at the corners")

    @classmethod
    def sphere(cls, radius=1.0, c=0.5):
        r = float(radius)
        return cls("sphere", (r, r, r), float(c))

    @classmethod
    def ellipsoid(cls, a1, a2, a3, c=0.5):
        return cls("ellipsoid", (float(a1), float(a2), float(a3)), float(c))

    @classmethod
    def plate(cls, c=0.5):
        return cls("plate", (1.0, 1.0, 1.0), float(c))

    @property
    def is_elliptic(self):
        return self.kind != "plate"

    @property
    def area(self):
        return (2.0 * self.c) ** 2

    def check_domain(self, y):
        y = np.asarray(y, dtype=float)
        if y.shape[-1] != 2:
            raise ArgumentError("points must have a trailing axis of length 2")
        if not np.all(np.isfinite(y)):
            raise DomainError("non-finite point")
        if np.any(np.abs(y) > self.c + _DOMAIN_TOL):
            bad = y[np.any(np.abs(y) > self.c + _DOMAIN_TOL, axis=-1)][0]
            raise DomainError(
                f"point ({bad[0]:.6g}, {bad[1]:.6g}) outside the chart square "
                f"(-{self.c}, {self.c})^2")
        return y

    def height(self, y):
        """Return f and its derivatives up to third order.

        Returns
        -------
        f : ndarray (...)
        f1 : ndarray (..., 2)
        f2 : ndarray (..., 2, 2)
        f3 : ndarray (..., 2, 2, 2)
        """
        y = np.asarray(y, dtype=float)
        shape = y.shape[:-1]
        if self.kind == "plate":
            return (np.zeros(shape), np.zeros(shape + (2,)),
                    np.zeros(shape + (2, 2)), np.zeros(shape + (2, 2, 2)))
        A1, A2, A3 = self.semiaxes
        inv = np.array([1.0 / A1 ** 2, 1.0 / A2 ** 2])
        q = 1.0 - np.sum(y ** 2 * inv, axis=-1)
        q1 = -2.0 * y * inv                      # dq/dy_a
        q2 = np.diag(-2.0 * inv)                 # d2q, constant
        g0 = np.sqrt(q)
        g1 = 0.5 / g0
        g2 = -0.25 / (q * g0)
        g3 = 0.375 / (q * q * g0)
        f = -A3 * g0
        f1 = -A3 * g1[..., None] * q1
        f2 = -A3 * (g2[..., None, None] * q1[..., :, None] * q1[..., None, :]
                    + g1[..., None, None] * q2)
        qa = q1[..., :, None, None]
        qb = q1[..., None, :, None]
        qc = q1[..., None, None, :]
        f3 = -A3 * (g3[..., None, None, None] * qa * qb * qc
                    + g2[..., None, None, None] * (q2[:, None, :] * qb
                                                    + qa * q2[None, :, :]
                                                    + q2[:, :, None] * qc))
        return f, f1, f2, f3

    def theta(self, y):
        """Position theta(y) in E^3, shape (..., 3)."""
        y = np.asarray(y, dtype=float)
        f = self.height(y)[0]
        return np.concatenate([y, f[..., None]], axis=-1)


@dataclass(frozen=True)
class GeometryPointData:
    a_cov: np.ndarray
    a3: np.ndarray
    a_con: np.ndarray
    a_cov_form: np.ndarray
    a_con_form: np.ndarray
    b_cov: np.ndarray
    b_mixed: np.ndarray
    christoffel: np.ndarray
    sqrt_a: np.ndarray
    gauss_K: np.ndarray


@dataclass(frozen=True)
class GeometryDerivatives:
    """First derivatives of the surface fields (index ``gamma`` first)."""

    d_a3: np.ndarray            # (2, 3)
    dd_a3: np.ndarray           # (2, 2, 3)
    d_a_cov_form: np.ndarray    # (2, 2, 2)
    d_a_con_form: np.ndarray    # (2, 2, 2)
    d_b_cov: np.ndarray         # (2, 2, 2)
    d_b_mixed: np.ndarray       # (2, 2, 2): [g, a, b] = d_g b^b_a
    d_christoffel: np.ndarray   # (2, 2, 2, 2): [g, s, a, b]
    d_sqrt_a: np.ndarray        # (2,)


def _surface_terms(chart, y):
    y = chart.check_domain(y)
    f, f1, f2, f3 = chart.height(y)
    shape = y.shape[:-1]
    a_cov = np.zeros(shape + (2, 3))
    a_cov[..., 0, 0] = 1.0
    a_cov[..., 1, 1] = 1.0
    a_cov[..., :, 2] = f1
    # d_a a_b = (0, 0, f_ab)
    da_cov = np.zeros(shape + (2, 2, 3))
    da_cov[..., 2] = f2
    return y, (f, f1, f2, f3), a_cov, da_cov


def eval_geometry(chart, y):
    """Fundamental forms, Christoffel symbols, area factor and curvature.

    Parameters
    ----------
    chart : Chart
    y : array_like (..., 2)
        Points of the closed square.

    Returns
    -------
    GeometryPointData
    """
    y, _, a_cov, da_cov = _surface_terms(chart, y)
    n = np.cross(a_cov[..., 0, :], a_cov[..., 1, :])
    norm_n = np.linalg.norm(n, axis=-1)
    if np.any(norm_n < 1e-12):
        raise ImmersionError("tangent vectors are linearly dependent")
    a3 = n / norm_n[..., None]
    A = np.einsum("...ai,...bi->...ab", a_cov, a_cov)
    Ainv = np.linalg.inv(A)
    a_con = np.einsum("...ab,...bi->...ai", Ainv, a_cov)
    b_cov = np.einsum("...abi,...i->...ab", da_cov, a3)
    b_cov = 0.5 * (b_cov + np.swapaxes(b_cov, -1, -2))
    b_mixed = np.einsum("...bs,...as->...ab", Ainv, b_cov)
    chris = np.einsum("...abi,...si->...sab", da_cov, a_con)
    det_a = np.linalg.det(A)
    K = np.linalg.det(b_cov) / det_a
    return GeometryPointData(a_cov=a_cov, a3=a3, a_con=a_con, a_cov_form=A,
                             a_con_form=Ainv, b_cov=b_cov, b_mixed=b_mixed,
                             christoffel=chris, sqrt_a=np.sqrt(det_a),
                             gauss_K=K)


def eval_geometry_derivatives(chart, y, geom=None):
    """Exact first derivatives of the surface fields needed by bending terms.

    Returns
    -------
    GeometryDerivatives
    """
    y, (f, f1, f2, f3), a_cov, da_cov = _surface_terms(chart, y)
    if geom is None:
        geom = eval_geometry(chart, y)
    shape = y.shape[:-1]
    # n = (-f1, -f2, 1), W = |n|, a3 = n / W
    W = np.sqrt(1.0 + np.sum(f1 ** 2, axis=-1))
    n = np.concatenate([-f1, np.ones(shape + (1,))], axis=-1)
    dn = np.zeros(shape + (2, 3))
    dn[..., :2] = -np.swapaxes(f2, -1, -2)       # d_g n_k = -f_{k g}
    ddn = np.zeros(shape + (2, 2, 3))
    ddn[..., :2] = -np.moveaxis(f3, -3, -1)      # d_g d_h n_k = -f_{k g h}
    dW = np.einsum("...v,...vg->...g", f1, f2) / W[..., None]
    ddW = (np.einsum("...vg,...vh->...gh", f2, f2)
           + np.einsum("...v,...vgh->...gh", f1, f3)) / W[..., None, None] \
        - dW[..., :, None] * dW[..., None, :] / W[..., None, None]
    Wc = W[..., None]
    d_a3 = dn / Wc[..., None] - n[..., None, :] * (dW / W[..., None] ** 2)[..., None]
    W2 = W[..., None, None, None]
    dd_a3 = (ddn / W2
             - dn[..., :, None, :] * dW[..., None, :, None] / W2 ** 2
             - dn[..., None, :, :] * dW[..., :, None, None] / W2 ** 2
             - n[..., None, None, :] * ddW[..., None] / W2 ** 2
             + 2.0 * n[..., None, None, :] * (dW[..., :, None] * dW[..., None, :])[..., None] / W2 ** 3)
    # b_ab = f_ab / W
    d_b_cov = (np.moveaxis(f3, -1, -3) / W[..., None, None, None]
               - f2[..., None, :, :] * (dW / W[..., None] ** 2)[..., :, None, None])
    # a_ab = delta + f_a f_b
    d_A = (np.moveaxis(f2, -1, -2)[..., :, :, None] * f1[..., None, None, :]
           + f1[..., None, :, None] * f2[..., :, None, :])
    Ainv = geom.a_con_form
    d_Ainv = -np.einsum("...ab,...gbc,...cd->...gad", Ainv, d_A, Ainv)
    d_b_mixed = (np.einsum("...gbs,...as->...gab", d_Ainv, geom.b_cov)
                 + np.einsum("...bs,...gas->...gab", Ainv, d_b_cov))
    # Gamma^s_ab = a^{sv} f_ab f_v
    d_chris = (np.einsum("...gsv,...ab,...v->...gsab", d_Ainv, f2, f1)
               + np.einsum("...sv,...abg,...v->...gsab", Ainv, f3, f1)
               + np.einsum("...sv,...ab,...vg->...gsab", Ainv, f2, f2))
    # sqrt(a) = W for a graph
    d_sqrt_a = dW
    return GeometryDerivatives(d_a3=d_a3, dd_a3=dd_a3, d_a_cov_form=d_A,
                               d_a_con_form=d_Ainv, d_b_cov=d_b_cov,
                               d_b_mixed=d_b_mixed, d_christoffel=d_chris,
                               d_sqrt_a=d_sqrt_a)


def assert_elliptic(chart, n=16):
    """Minimum Gaussian curvature over an n x n sample grid of the closed square.

    Raises
    ------
    NonEllipticError
        If the minimum is not strictly positive; the message names the point.
    """
    if n < 8:
        raise ArgumentError("sample grid needs n >= 8")
    t = np.linspace(-chart.c, chart.c, n)
    Y = np.stack(np.meshgrid(t, t, indexing="ij"), axis=-1)
    K = eval_geometry(chart, Y).gauss_K
    idx = np.unravel_index(np.argmin(K), K.shape)
    k_min = float(K[idx])
    if not k_min > 0:
        y = Y[idx]
        raise NonEllipticError(
            f"non-elliptic: Gaussian curvature {k_min:.3g} <= 0 at "
            f"y=({y[0]:.6g}, {y[1]:.6g})")
    return k_min


@dataclass(frozen=True)
class ScaledVolumeData:
    """Three-dimensional tensors of the shell Theta = theta + eps*x3*a3.

    Index 2 stands for the transverse direction. Derivatives in the
    transverse direction are taken with respect to the unscaled thickness
    coordinate eps*x3.
    """

    eps: float
    x3: float
    g_cov: np.ndarray       # (3, 3): rows g_i
    g_con: np.ndarray       # (3, 3): rows g^j
    gamma3d: np.ndarray     # (3, 3, 3): [p, i, j]
    g_det: float
    A4: np.ndarray          # (3, 3, 3, 3)
    A4_limit: np.ndarray    # (3, 3, 3, 3)


def _iso_tensor(G, lam, mu):
    return (lam * np.einsum("ij,kl->ijkl", G, G)
            + mu * (np.einsum("ik,jl->ijkl", G, G) + np.einsum("il,jk->ijkl", G, G)))


def eval_scaled_tensors(chart, y, x3, eps, lame):
    """Evaluate the metric, Christoffel and elasticity tensors of the thick shell.

    Parameters
    ----------
    chart : Chart
    y : array_like (2,)
    x3 : float in [-1, 1]
    eps : float in (0, 0.3]
    lame : LameConstants or (lambda, mu)

    Returns
    -------
    ScaledVolumeData
    """
    eps = float(eps)
    x3 = float(x3)
    if not eps > 0:
        raise ArgumentError("eps must be positive")
    if eps > MAX_EPS:
        raise ArgumentError(f"eps={eps} exceeds the validity guard {MAX_EPS}")
    if not -1.0 <= x3 <= 1.0:
        raise DomainError("x3 must lie in [-1, 1]")
    lam, mu = _lame_pair(lame)
    y = np.asarray(y, dtype=float)
    geom = eval_geometry(chart, y)
    der = eval_geometry_derivatives(chart, y, geom)
    _, _, _, da_cov = _surface_terms(chart, y)
    t = eps * x3
    g_cov = np.empty((3, 3))
    g_cov[:2] = geom.a_cov + t * der.d_a3
    g_cov[2] = geom.a3
    G = g_cov @ g_cov.T
    g_det = float(np.linalg.det(G))
    if not g_det > 0:
        raise ImmersionError("Theta is not an immersion at this point")
    g_con = np.linalg.solve(G, g_cov)
    # d_i g_j, with d_3 = d/d(eps x3)
    dg = np.zeros((3, 3, 3))
    dg[:2, :2] = da_cov + t * der.dd_a3
    dg[:2, 2] = der.d_a3
    dg[2, :2] = der.d_a3
    gamma3d = np.einsum("iju,pu->pij", dg, g_con)
    A4 = _iso_tensor(np.linalg.inv(G), lam, mu)
    G0 = np.zeros((3, 3))
    G0[:2, :2] = geom.a_con_form
    G0[2, 2] = 1.0
    A4_limit = _iso_tensor(G0, lam, mu)
    return ScaledVolumeData(eps=eps, x3=x3, g_cov=g_cov, g_con=g_con,
                            gamma3d=gamma3d, g_det=g_det, A4=A4,
                            A4_limit=A4_limit)


def _lame_pair(lame):
    if hasattr(lame, "mu"):
        return float(lame.lam), float(lame.mu)
    lam, mu = lame
    return float(lam), float(mu)
