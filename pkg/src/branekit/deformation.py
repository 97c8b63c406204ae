"""First-order deformation calculus of embedded worldvolumes.

A deformation is described by its normal components phi^i (shape
(S, C)) and an optional tangential part phi^a (shape (S, D), upper
index).  Every ``deform_*`` function returns the first-order change of
one geometric quantity under X -> X + eps * n_i phi^i, covariant under
normal-frame rotations; each is validated against a finite-difference
perturbation oracle in the test suite.

Pair-valued operations evaluate antisymmetric bilinear forms on two
deformations (the numerical stand-in for wedge products of one-forms
on the solution space): swapping the arguments flips the sign exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .frame_geometry import (GeometryCache, laplacian, normal_cov_derivative,
                             raise_first)
from .worldvolume import Embedding, as_array


def _check_normal(phi, geom: GeometryCache) -> np.ndarray:
    arr = as_array(phi)
    if arr.shape != geom.grid.shape + (geom.codim,):
        raise ShapeError(
            f"normal perturbation must have shape {geom.grid.shape + (geom.codim,)}"
        )
    return arr


def _check_tangential(phi_a, geom: GeometryCache) -> np.ndarray:
    arr = as_array(phi_a)
    if arr.shape != geom.grid.shape + (geom.dim,):
        raise ShapeError(
            f"tangential perturbation must have shape {geom.grid.shape + (geom.dim,)}"
        )
    return arr


def normal_push(geom: GeometryCache, phi, eps: float) -> Embedding:
    """Embedding displaced along the normal frame: X + eps * n_i phi^i."""
    phi = _check_normal(phi, geom)
    x = geom.x + eps * np.einsum("...i,...im->...m", phi, geom.normal)
    return Embedding(geom.grid, x)


def decompose(delta_x, geom: GeometryCache):
    """Split an ambient variation into tangential and normal parts.

    Returns (phi_a, phi_i) with phi^a = g(dX, e_b) gamma^{ba} and
    phi^i = g(dX, n^i).  The frame reconstruction e_a phi^a + n_i phi^i
    recovers dX to the frame orthonormality tolerance.
    """
    dx = as_array(delta_x)
    if dx.shape != geom.grid.shape + (geom.ambient_dim,):
        raise ShapeError("ambient variation has wrong shape")
    dxl = np.einsum("...m,...mn->...n", dx, geom.g)
    phi_a = np.einsum("...n,...an->...a", dxl, geom.tangent_up)
    phi_i = np.einsum("...n,...in->...i", dxl, geom.normal)
    return phi_a, phi_i


def reconstruct(phi_a, phi_i, geom: GeometryCache) -> np.ndarray:
    """e_a phi^a + n_i phi^i."""
    out = 0.0
    if phi_a is not None:
        out = out + np.einsum("...a,...am->...m", _check_tangential(phi_a, geom), geom.tangent)
    if phi_i is not None:
        out = out + np.einsum("...i,...im->...m", _check_normal(phi_i, geom), geom.normal)
    return out


# -- deformations of the intrinsic geometry -----------------------------------


def deform_metric(phi, geom: GeometryCache):
    """(delta gamma_ab, delta gamma^ab) = (2 K_ab^i phi_i, -2 K^{ab i} phi_i)."""
    phi = _check_normal(phi, geom)
    lo = 2.0 * np.einsum("...abi,...i->...ab", geom.second, phi)
    up = -2.0 * np.einsum("...abi,...i->...ab", geom.second_up(), phi)
    return lo, up


def deform_measure(phi, geom: GeometryCache) -> np.ndarray:
    """delta sqrt|gamma| = sqrt|gamma| K^i phi_i."""
    phi = _check_normal(phi, geom)
    return geom.sqrtg * np.einsum("...i,...i->...", geom.mean, phi)


def deform_tangent(phi, geom: GeometryCache):
    """Frame displacement data (beta_ab, J_ai) = (K_ab^i phi_i, cov_a phi_i)."""
    phi = _check_normal(phi, geom)
    beta = np.einsum("...abi,...i->...ab", geom.second, phi)
    return beta, normal_cov_derivative(phi, "i", geom)


# -- deformations of the extrinsic geometry -----------------------------------


def deform_extrinsic(phi, geom: GeometryCache) -> np.ndarray:
    """Covariant deformation of the second fundamental form K_ab^i.

    -cov_a cov_b phi^i + (K_ac^i K^c_b_j + B_ab^i_j) phi^j.  The
    curvature coupling carries the sign that makes the gamma^{ab} trace
    of this expression match ``deform_mean_curvature`` exactly; on a
    closed geodesic of a unit-curvature background the result is
    -(phi'' + phi), the Jacobi form.
    """
    phi = _check_normal(phi, geom)
    hess = normal_cov_derivative(normal_cov_derivative(phi, "i", geom), "ai", geom)
    kk = np.einsum("...aci,...cd,...dbj->...abij", geom.second, geom.gamma_inv, geom.second)
    coupling = kk + geom.riem_tangent
    return -hess + np.einsum("...abij,...j->...abi", coupling, phi)


def deform_mean_curvature(phi, geom: GeometryCache) -> np.ndarray:
    """Covariant deformation of K^i: -lap phi^i - (KK)^i_j phi^j + A^i_j phi^j."""
    phi = _check_normal(phi, geom)
    coupling = geom.second_sq() - geom.riem_trace
    return -laplacian(phi, "i", geom) - np.einsum("...ij,...j->...i", coupling, phi)


def deform_twist(phi, geom: GeometryCache) -> np.ndarray:
    """One-form value of (delta omega_a^{ij} - cov_a rotation) on phi.

    -K_a^{b i} cov_b phi^j + K_a^{b j} cov_b phi^i + C_a^{ijk} phi^k;
    antisymmetric in (i, j) exactly.
    """
    phi = _check_normal(phi, geom)
    grad = normal_cov_derivative(phi, "i", geom)        # (S, b, j)
    k_mix = np.einsum("...abi,...bc->...aci", geom.second, geom.gamma_inv)
    term = np.einsum("...abi,...bj->...aij", k_mix, grad)
    out = -term + np.swapaxes(term, -1, -2)
    out = out + np.einsum("...aijk,...k->...aij", geom.riem_normal, phi)
    return out


def deform_grad(psi, dpsi, phi, geom: GeometryCache) -> np.ndarray:
    """Deformation of cov_b psi^i for a normal field psi with known
    deformation dpsi (both (S, C)).

    cov_b(dpsi^i) - (delta omega - cov rotation)_b^{ij}(phi) psi_j.
    With psi = K^i and dpsi = deform_mean_curvature(phi) this is the
    deformation of the mean-curvature gradient.
    """
    psi = _check_normal(psi, geom)
    dpsi = _check_normal(dpsi, geom)
    tw = deform_twist(phi, geom)
    return normal_cov_derivative(dpsi, "i", geom) - np.einsum("...bij,...j->...bi", tw, psi)


def deform_grad_pair(phi1, phi2, geom: GeometryCache) -> np.ndarray:
    """Pair evaluation of the deformation of cov_b phi^i.

    The fundamental perturbations carry no second variation, so only
    the twist term survives: -[tw(phi1)^{ij} phi2_j - tw(phi2)^{ij} phi1_j].
    Antisymmetric under swap exactly.
    """
    p1 = _check_normal(phi1, geom)
    p2 = _check_normal(phi2, geom)
    t1 = deform_twist(p1, geom)
    t2 = deform_twist(p2, geom)
    return -(np.einsum("...bij,...j->...bi", t1, p2)
             - np.einsum("...bij,...j->...bi", t2, p1))


def deform_tangential_oneform_pair(phi1, phi2, geom: GeometryCache,
                                   phi1_a=None, phi2_a=None) -> np.ndarray:
    """Pair evaluation of the exterior derivative of the tangential
    one-form phi^a on the solution space.

    -[K^{ab i}(phi1_i phi2_b - phi2_i phi1_b)
      + (phi1_i cov^a phi2^i - phi2_i cov^a phi1^i)],
    with phi_b the lowered tangential parts (zero when omitted).
    """
    p1 = _check_normal(phi1, geom)
    p2 = _check_normal(phi2, geom)
    g1 = raise_first(normal_cov_derivative(p1, "i", geom), geom)
    g2 = raise_first(normal_cov_derivative(p2, "i", geom), geom)
    out = -(np.einsum("...i,...ai->...a", p1, g2) - np.einsum("...i,...ai->...a", p2, g1))
    if phi1_a is not None or phi2_a is not None:
        t1 = _check_tangential(phi1_a, geom) if phi1_a is not None else np.zeros(geom.grid.shape + (geom.dim,))
        t2 = _check_tangential(phi2_a, geom) if phi2_a is not None else np.zeros(geom.grid.shape + (geom.dim,))
        b1 = np.einsum("...ab,...b->...a", geom.gamma, t1)
        b2 = np.einsum("...ab,...b->...a", geom.gamma, t2)
        kup = geom.second_up()
        out = out - (np.einsum("...abi,...i,...b->...a", kup, p1, b2)
                     - np.einsum("...abi,...i,...b->...a", kup, p2, b1))
    return out
