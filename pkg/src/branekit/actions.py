"""Area and rigidity functionals, their first variations, and EOM residuals.

Both first variations are returned as an :class:`ActionBreakdown` whose
total splits exactly into a bulk part (the EOM density contracted with
the normal perturbation) and a divergence part (the discrete flux of
the boundary potential).  Tangential perturbations contribute to the
divergence part only, by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .deformation import _check_normal, _check_tangential
from .frame_geometry import GeometryCache, laplacian
from .symplectic import qec_potential
from .worldvolume import _diff_array, integrate_scalar


@dataclass(frozen=True)
class ActionBreakdown:
    total: float
    bulk_term: float
    divergence_term: float
    bulk_density: np.ndarray
    divergence_density: np.ndarray


def _flux_integral(dens: np.ndarray, geom: GeometryCache) -> np.ndarray:
    """d_a F^a for a densitised flux field (S, D)."""
    out = 0.0
    gd = geom.grid.dim
    for a in range(geom.dim):
        out = out + _diff_array(np.take(dens, a, axis=gd), geom.grid, a)
    return out


# -- area term ------------------------------------------------------------------


def dng_action(geom: GeometryCache, mu: float = 1.0) -> float:
    """-mu * integral of sqrt|gamma|."""
    return -mu * integrate_scalar(geom.sqrtg, grid=geom.grid)


def dng_eom_residual(geom: GeometryCache) -> np.ndarray:
    """Mean curvature field K^i; extremal surfaces drive it to zero."""
    return geom.mean


def dng_first_variation(geom: GeometryCache, phi_i, phi_a=None,
                        mu: float = 1.0) -> ActionBreakdown:
    """First variation of the area term.

    bulk = -mu * int sqrtg K^i phi_i;   divergence = -mu * int d_a(sqrtg phi^a).
    """
    p = _check_normal(phi_i, geom)
    bulk_density = -mu * geom.sqrtg * np.einsum("...i,...i->...", geom.mean, p)
    if phi_a is not None:
        t = _check_tangential(phi_a, geom)
        div_density = -mu * _flux_integral(geom.sqrtg[..., None] * t, geom)
    else:
        div_density = np.zeros(geom.grid.shape)
    bulk = integrate_scalar(bulk_density, grid=geom.grid)
    div = integrate_scalar(div_density, grid=geom.grid)
    return ActionBreakdown(bulk + div, bulk, div, bulk_density, div_density)


# -- rigidity term ----------------------------------------------------------------


def qec_action(geom: GeometryCache, alpha: float = 1.0) -> float:
    """alpha * integral of sqrt|gamma| K_i K^i."""
    ksq = np.einsum("...i,...i->...", geom.mean, geom.mean)
    return alpha * integrate_scalar(geom.sqrtg * ksq, grid=geom.grid)


def qec_eom_residual(geom: GeometryCache) -> np.ndarray:
    """E^i = lap K^i + ((KK)^i_j - 1/2 K^i K_j - A^i_j) K^j.

    The bulk part of the first variation is -2 alpha int sqrtg E^i phi_i;
    any worldvolume with K^i = 0 satisfies E^i = 0 term by term.
    """
    coupling = geom.second_sq() - geom.riem_trace
    ksq = np.einsum("...i,...i->...", geom.mean, geom.mean)
    out = laplacian(geom.mean, "i", geom)
    out = out + np.einsum("...ij,...j->...i", coupling, geom.mean)
    out = out - 0.5 * ksq[..., None] * geom.mean
    return out


def qec_first_variation(geom: GeometryCache, phi_i, phi_a=None,
                        alpha: float = 1.0) -> ActionBreakdown:
    """First variation of the rigidity term.

    bulk = -2 alpha int sqrtg E^i phi_i;
    divergence = 2 alpha int d_a Psi^a with Psi^a the boundary potential
    (including its 1/2 K^2 phi^a part when a tangential piece is given).
    """
    p = _check_normal(phi_i, geom)
    eom = qec_eom_residual(geom)
    bulk_density = -2.0 * alpha * geom.sqrtg * np.einsum("...i,...i->...", eom, p)
    psi = qec_potential(p, geom, phi_a=phi_a)
    div_density = 2.0 * alpha * _flux_integral(psi, geom)
    bulk = integrate_scalar(bulk_density, grid=geom.grid)
    div = integrate_scalar(div_density, grid=geom.grid)
    return ActionBreakdown(bulk + div, bulk, div, bulk_density, div_density)
