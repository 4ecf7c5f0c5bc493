"""
Pointwise shell mechanics: membrane strain, bending strain, the 2D
elasticity tensor and the energy densities built from them.

All functions broadcast over leading axes, so the same code evaluates one
point or every (quadrature point, basis function) pair of an element.
Displacement gradients use ``grads[..., i, beta] = d_beta eta_i``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, ContractError

__all__ = [
    "LameConstants",
    "ElasticityTensor2D",
    "StrainPointValues",
    "elasticity_tensor",
    "gamma_ab",
    "rho_ab",
    "energy_densities",
    "expand_fields",
]


@dataclass(frozen=True)
class LameConstants:
    lam: float = 1.0
    mu: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.lam) and np.isfinite(self.mu)):
            raise ArgumentError("Lame constants must be finite")
        if self.mu <= 0:
            raise ArgumentError(f"mu must be positive, got {self.mu}")
        if self.lam < 0:
            raise ArgumentError(f"lambda must be nonnegative, got {self.lam}")


@dataclass(frozen=True)
class ElasticityTensor2D:
    comp: np.ndarray   # (..., 2, 2, 2, 2)

    def quadratic_matrix(self):
        """3x3 matrix of the form t -> a t t in orthonormal coordinates
        (t11, t22, sqrt(2) t12), so its eigenvalues bound the form against
        sum |t_ab|^2."""
        a = self.comp
        r2 = np.sqrt(2.0)
        idx = [(0, 0, 1.0), (1, 1, 1.0), (0, 1, r2)]
        out = np.empty(a.shape[:-4] + (3, 3))
        for i, (p, q, wi) in enumerate(idx):
            for j, (s, t, wj) in enumerate(idx):
                if p == q and s == t:
                    out[..., i, j] = a[..., p, q, s, t]
                elif p == q:
                    out[..., i, j] = 2.0 * a[..., p, q, s, t] / wj
                elif s == t:
                    out[..., i, j] = 2.0 * a[..., p, q, s, t] / wi
                else:
                    out[..., i, j] = 4.0 * a[..., p, q, s, t] / (wi * wj)
        return out

    def positivity_constant(self):
        """Per-point c_pd with a t t >= c_pd sum |t_ab|^2."""
        return np.linalg.eigvalsh(self.quadratic_matrix())[..., 0]


@dataclass(frozen=True)
class StrainPointValues:
    gamma: np.ndarray = None
    rho: np.ndarray = None


def expand_fields(obj, axis):
    """Copy of a geometry dataclass with ``np.expand_dims(field, axis)``
    applied to every array field, for broadcasting against basis axes."""
    kwargs = {k: np.expand_dims(v, axis) if isinstance(v, np.ndarray) else v
              for k, v in vars(obj).items()}
    return type(obj)(**kwargs)


def elasticity_tensor(geom, lame):
    """Contravariant 2D elasticity tensor

        (4 lam mu / (lam + 2 mu)) a^ab a^st + 2 mu (a^as a^bt + a^at a^bs).
    """
    lam, mu = _lame(lame)
    if mu <= 0:
        raise ArgumentError("mu must be positive")
    A = geom.a_con_form if hasattr(geom, "a_con_form") else np.asarray(geom)
    c1 = 4.0 * lam * mu / (lam + 2.0 * mu)
    comp = (c1 * np.einsum("...ab,...st->...abst", A, A)
            + 2.0 * mu * (np.einsum("...as,...bt->...abst", A, A)
                          + np.einsum("...at,...bs->...abst", A, A)))
    return ElasticityTensor2D(comp)


def gamma_ab(geom, eta_vals, eta_grads):
    """Linearised change of metric

        gamma_ab = (d_b eta_a + d_a eta_b) / 2 - Gamma^s_ab eta_s - b_ab eta_3.

    Parameters
    ----------
    geom : GeometryPointData
    eta_vals : array (..., 3)
    eta_grads : array (..., 2 or 3, 2)
        Only the tangential rows are used.

    Returns
    -------
    StrainPointValues with ``gamma`` of shape (..., 2, 2).
    """
    eta_vals = np.asarray(eta_vals, dtype=float)
    G = np.asarray(eta_grads, dtype=float)[..., :2, :]
    sym = 0.5 * (G + np.swapaxes(G, -1, -2))
    gam = (sym
           - np.einsum("...sab,...s->...ab", geom.christoffel, eta_vals[..., :2])
           - geom.b_cov * eta_vals[..., 2, None, None])
    return StrainPointValues(gamma=gam)


def rho_ab(geom, geom_derivs, eta_vals, eta_grads, eta3_hessian=None):
    """Linearised change of curvature (classical Koiter form).

    Needs the full gradient including the row of eta_3 and the Hessian of
    eta_3. The result is symmetrised; the unsymmetrised expression is already
    symmetric up to rounding by the Codazzi equations.
    """
    if eta3_hessian is None:
        raise ContractError("bending strain needs the Hessian of eta_3 "
                            "(membrane fields are not differentiable enough)")
    G = np.asarray(eta_grads, dtype=float)
    if G.shape[-2] != 3:
        raise ContractError("bending strain needs the gradient of eta_3")
    eta = np.asarray(eta_vals, dtype=float)
    H = np.asarray(eta3_hessian, dtype=float)
    bm = geom.b_mixed          # [a, s] = b^s_a
    chris = geom.christoffel   # [s, a, b]
    et = eta[..., :2]
    # covariant derivative of the tangential part: n_{s|b} = d_b eta_s - Gamma^t_{bs} eta_t
    cov = np.swapaxes(G[..., :2, :], -1, -2) \
        - np.einsum("...tbs,...t->...bs", chris, et)          # [b, s]
    rho = (H
           - np.einsum("...sab,...s->...ab", chris, G[..., 2, :])
           - np.einsum("...as,...sb->...ab", bm, geom.b_cov) * eta[..., 2, None, None]
           + np.einsum("...as,...bs->...ab", bm, cov)
           + np.einsum("...bt,...at->...ab", bm, cov)
           + np.einsum("...abt,...t->...ab", geom_derivs.d_b_mixed, et)
           + np.einsum("...tas,...bs,...t->...ab", chris, bm, et)
           - np.einsum("...sab,...st,...t->...ab", chris, bm, et))
    rho = 0.5 * (rho + np.swapaxes(rho, -1, -2))
    return StrainPointValues(rho=rho)


def energy_densities(tensor, s1, s2):
    """Membrane density a^{abst} gamma_st(1) gamma_ab(2) and flexural density
    (1/3) a^{abst} rho_st(1) rho_ab(2). Missing strains contribute 0."""
    a = tensor.comp if isinstance(tensor, ElasticityTensor2D) else tensor

    def contract(t1, t2):
        if t1 is None or t2 is None:
            return np.zeros(a.shape[:-4])
        return np.einsum("...abst,...st,...ab->...", a, t1, t2)

    membrane = contract(s1.gamma, s2.gamma)
    flexural = contract(s1.rho, s2.rho) / 3.0
    return membrane, flexural


def _lame(lame):
    if isinstance(lame, LameConstants):
        return lame.lam, lame.mu
    lam, mu = lame
    return float(lam), float(mu)
