"""Symplectic potentials, conserved currents, and the two-form on slices.

Currents are stored *densitised*: the sqrt|gamma| factor is included in
the per-node components, so covariant conservation is plain coordinate
divergence d_a J^a -> 0 and slice integrals need no extra measure.

Two independent routes produce the rigidity-term current for a pair of
perturbations:

* ``qec_current_adjoint_pair``: the eight-term bilinear exchange
  expression whose divergence telescopes against the fourth-order
  linearised operator (self-adjointness route);
* ``qec_current_from_potential``: the antisymmetrised pair derivative
  of the boundary potential ``qec_potential``, assembled from the
  deformation building blocks of :mod:`branekit.deformation`.

On surfaces whose discrete mean curvature vanishes the two routes agree
node-wise to rounding; this is the central cross-check of the package.

All pair builders are structurally antisymmetric (every term is an
explicit commutator of the two arguments), and antisymmetry is also
asserted at construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError
from .frame_geometry import GeometryCache, laplacian, normal_cov_derivative, raise_first
from .deformation import (_check_normal, _check_tangential, decompose,
                          deform_grad, deform_grad_pair, deform_mean_curvature,
                          deform_measure, deform_tangential_oneform_pair,
                          deform_twist)
from .worldvolume import _diff_array, integrate_scalar


@dataclass(frozen=True)
class CurrentField:
    """Densitised worldvolume current J^a with its coordinate divergence."""

    geom: GeometryCache
    data: np.ndarray          # (S, D)
    divergence: np.ndarray    # (S,)
    provenance: str

    @property
    def div_max(self) -> float:
        return float(np.abs(self.divergence).max())

    @property
    def div_l2(self) -> float:
        w = self.geom.grid.quad_weights()
        return float(np.sqrt(np.sum(w * self.divergence**2)))


@dataclass(frozen=True)
class SliceSpec:
    """Constant-coordinate cut: nodes with xi^axis at a fixed index."""

    axis: int
    index: int


@dataclass(frozen=True)
class SymplecticValue:
    value: float
    slice_spec: SliceSpec
    provenance: str


def _coordinate_divergence(j: np.ndarray, geom: GeometryCache) -> np.ndarray:
    out = 0.0
    gd = geom.grid.dim
    for a in range(geom.dim):
        out = out + _diff_array(np.take(j, a, axis=gd), geom.grid, a)
    return out


def _make_current(j: np.ndarray, geom: GeometryCache, provenance: str) -> CurrentField:
    if not np.all(np.isfinite(j)):
        raise ShapeError("current contains non-finite entries")
    return CurrentField(geom, j, _coordinate_divergence(j, geom), provenance)


def _assert_pair_antisymmetry(build, phi1, phi2, geom) -> np.ndarray:
    j12 = build(phi1, phi2)
    j21 = build(phi2, phi1)
    scale = np.abs(j12).max() + np.abs(j21).max() + 1e-300
    if np.abs(j12 + j21).max() > 1e-12 * scale:
        raise ShapeError("pair current failed its antisymmetry check")
    return j12


# -- potentials and currents ---------------------------------------------------


def dng_potential_pair(phi1, phi2, geom: GeometryCache,
                       phi1_a=None, phi2_a=None) -> CurrentField:
    """Antisymmetrised pair derivative of the area-term boundary potential.

    sqrt|gamma| (phi1_i cov^a phi2^i - phi2_i cov^a phi1^i), plus the
    antisymmetrised K^{abi} phi_i phi_b exchange term when tangential
    parts are supplied.  Equals -sqrt|gamma| times the pair evaluation
    of the tangential one-form derivative, a cross-module identity the
    tests assert to rounding.
    """
    j12 = -geom.sqrtg[..., None] * deform_tangential_oneform_pair(
        phi1, phi2, geom, phi1_a, phi2_a)
    j21 = -geom.sqrtg[..., None] * deform_tangential_oneform_pair(
        phi2, phi1, geom, phi2_a, phi1_a)
    scale = np.abs(j12).max() + np.abs(j21).max() + 1e-300
    if np.abs(j12 + j21).max() > 1e-12 * scale:
        raise ShapeError("pair current failed its antisymmetry check")
    return _make_current(j12, geom, "dng_pair")


def qec_potential(phi, geom: GeometryCache, phi_a=None) -> np.ndarray:
    """Densitised boundary potential of the rigidity term, shape (S, D).

    sqrt|gamma| [ 1/2 K^j K_j phi^a + phi_i cov^a K^i - K_i cov^a phi^i ].
    """
    p = _check_normal(phi, geom)
    grad_k = raise_first(normal_cov_derivative(geom.mean, "i", geom), geom)
    grad_p = raise_first(normal_cov_derivative(p, "i", geom), geom)
    out = (np.einsum("...i,...ai->...a", p, grad_k)
           - np.einsum("...i,...ai->...a", geom.mean, grad_p))
    if phi_a is not None:
        ksq = np.einsum("...i,...i->...", geom.mean, geom.mean)
        out = out + 0.5 * ksq[..., None] * _check_tangential(phi_a, geom)
    return geom.sqrtg[..., None] * out


def qec_current_adjoint_pair(phi1, phi2, geom: GeometryCache) -> CurrentField:
    """Eight-term exchange current of the fourth-order linearised operator.

    J^a = sqrt|gamma| [ phi1 cov^a lap phi2 + lap phi1 cov^a phi2
                        - cov^a phi1 lap phi2 - cov^a lap phi1 phi2
                        + 2 (KK - A)^{ij} (phi1_i cov^a phi2_j
                                           - cov^a phi1_i phi2_j) ].
    Its coordinate divergence telescopes to
    sqrt|gamma| (phi1 . P^2 phi2 - P^2 phi1 . phi2) up to stencil error,
    so it is conserved on pairs of linearised solutions.
    """
    p1 = _check_normal(phi1, geom)
    p2 = _check_normal(phi2, geom)
    coupling = geom.second_sq() - geom.riem_trace

    def half(u, v):
        """Terms with u in the undifferentiated-first position."""
        lap_v = laplacian(v, "i", geom)
        grad_lap_v = raise_first(normal_cov_derivative(lap_v, "i", geom), geom)
        lap_u = laplacian(u, "i", geom)
        grad_v = raise_first(normal_cov_derivative(v, "i", geom), geom)
        out = (np.einsum("...i,...ai->...a", u, grad_lap_v)
               + np.einsum("...i,...ai->...a", lap_u, grad_v))
        out = out + 2.0 * np.einsum("...ij,...i,...aj->...a", coupling, u, grad_v)
        return out

    def build(u, v):
        return geom.sqrtg[..., None] * (half(u, v) - half(v, u))

    j = _assert_pair_antisymmetry(build, p1, p2, geom)
    return _make_current(j, geom, "qec_adjoint_pair")


def _from_potential_raw(p1: np.ndarray, p2: np.ndarray, geom: GeometryCache) -> np.ndarray:
    """One evaluation of the pair derivative of the boundary potential.

    With the tangential parts gauged to zero the assembly is

      delta Psi^a = (delta gamma^{ab}) Psi_b + gamma^{ab} [
          (delta sqrtg) h_b
          + sqrtg ( -1/2 K^2 <phi, cov_b phi>
                    + <delta cov_b K, phi> - <delta K, cov_b phi>
                    - K_i (delta cov_b phi)^i ) ]

    where every bracket is the antisymmetric pair evaluation and the
    deformation factors come from :mod:`branekit.deformation`.
    """
    ksq = np.einsum("...i,...i->...", geom.mean, geom.mean)
    grad_k = normal_cov_derivative(geom.mean, "i", geom)        # (S, b, i)

    def h_low(p, grad_p):
        # potential integrand with lower index (no sqrtg, tangential part zero)
        return (np.einsum("...i,...bi->...b", p, grad_k)
                - np.einsum("...i,...bi->...b", geom.mean, grad_p))

    gp1 = normal_cov_derivative(p1, "i", geom)
    gp2 = normal_cov_derivative(p2, "i", geom)
    h1, h2 = h_low(p1, gp1), h_low(p2, gp2)
    m1, m2 = deform_measure(p1, geom), deform_measure(p2, geom)   # include sqrtg
    dk1, dk2 = deform_mean_curvature(p1, geom), deform_mean_curvature(p2, geom)
    dgk1 = deform_grad(geom.mean, dk1, p1, geom)
    dgk2 = deform_grad(geom.mean, dk2, p2, geom)

    inner = -0.5 * ksq[..., None] * (
        np.einsum("...i,...bi->...b", p1, gp2) - np.einsum("...i,...bi->...b", p2, gp1))
    inner = inner + (np.einsum("...bi,...i->...b", dgk1, p2)
                     - np.einsum("...bi,...i->...b", dgk2, p1))
    inner = inner - (np.einsum("...i,...bi->...b", dk1, gp2)
                     - np.einsum("...i,...bi->...b", dk2, gp1))
    inner = inner - np.einsum("...i,...bi->...b", geom.mean,
                              deform_grad_pair(p1, p2, geom))

    t_low = (m1[..., None] * h2 - m2[..., None] * h1) + geom.sqrtg[..., None] * inner

    kup = geom.second_up()
    dginv_part = -2.0 * geom.sqrtg[..., None] * (
        np.einsum("...abi,...i,...b->...a", kup, p1, h2)
        - np.einsum("...abi,...i,...b->...a", kup, p2, h1))
    return dginv_part + np.einsum("...ab,...b->...a", geom.gamma_inv, t_low)


def qec_current_from_potential(phi1, phi2, geom: GeometryCache) -> CurrentField:
    """Pair derivative of the boundary potential (tangential parts gauged
    to zero), assembled from the deformation building blocks.

    Densitised by construction; reduces to the adjoint-route current on
    surfaces with vanishing mean curvature.
    """
    p1 = _check_normal(phi1, geom)
    p2 = _check_normal(phi2, geom)
    j = _assert_pair_antisymmetry(lambda a, b: _from_potential_raw(a, b, geom), p1, p2, geom)
    return _make_current(j, geom, "qec_from_potential")


def divergence(current: CurrentField):
    """Coordinate divergence of a densitised current with its norms."""
    div = current.divergence
    return div, {"max": current.div_max, "l2": current.div_l2}


# -- the two-form over slices --------------------------------------------------


def _slice_weights(geom: GeometryCache, axis: int) -> np.ndarray:
    axes = [geom.grid.axis_weights(a) for a in range(geom.dim) if a != axis]
    if not axes:
        return np.array(1.0)
    w = axes[0]
    for extra in axes[1:]:
        w = np.multiply.outer(w, extra)
    return w


def symplectic_form(current: CurrentField, slc: SliceSpec) -> SymplecticValue:
    """omega = integral of the slice-normal current component over the cut."""
    geom = current.geom
    grid = geom.grid
    if not 0 <= slc.axis < grid.dim:
        raise ShapeError("slice axis out of range")
    n = grid.sizes[slc.axis]
    if not 0 <= slc.index < n:
        raise ShapeError("slice index outside the grid")
    if not grid.periodic[slc.axis] and not 0 < slc.index < n - 1:
        raise ShapeError("slice must lie in the grid interior on bounded axes")
    comp = np.take(current.data, slc.axis, axis=grid.dim)   # (S,)
    cut = np.take(comp, slc.index, axis=slc.axis)
    val = float(np.sum(cut * _slice_weights(geom, slc.axis)))
    return SymplecticValue(val, slc, current.provenance)


def omega_by_slices(current: CurrentField, axis: int = 0) -> list:
    """omega across every admissible slice index of one axis."""
    grid = current.geom.grid
    n = grid.sizes[axis]
    idx = range(n) if grid.periodic[axis] else range(1, n - 1)
    return [symplectic_form(current, SliceSpec(axis, i)) for i in idx]


def exact_shift_two_form(coeffs: np.ndarray, geom: GeometryCache) -> np.ndarray:
    """Two-form contribution of a potential shift by an exact one-form.

    A shift Psi^a -> Psi^a + E^a with E^a(phi) = coeffs[a, i] phi^i and
    deformation-constant coefficients is exact; its pair derivative
    vanishes identically because fundamental perturbations carry no
    second variation.  Returned as an explicit zero field so callers can
    add it to any current and re-evaluate omega.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (geom.dim, geom.codim):
        raise ShapeError("shift coefficients must have shape (D, C)")
    return np.zeros(geom.grid.shape + (geom.dim,))


def potential_shift_report(current: CurrentField, slc: SliceSpec,
                           coeffs: np.ndarray, phi_probe=None) -> dict:
    """Exercise the potential-shift freedom on one slice.

    Reports the one-form shift magnitude on a probe perturbation (the
    potential itself genuinely changes) and the change in omega (zero by
    exactness).
    """
    geom = current.geom
    shift_two_form = exact_shift_two_form(coeffs, geom)
    shifted = CurrentField(geom, current.data + shift_two_form,
                           _coordinate_divergence(current.data + shift_two_form, geom),
                           current.provenance + "+shift")
    base = symplectic_form(current, slc).value
    moved = symplectic_form(shifted, slc).value
    shift_norm = 0.0
    if phi_probe is not None:
        p = _check_normal(phi_probe, geom)
        val = np.einsum("ai,...i->...a", np.asarray(coeffs, dtype=float), p)
        shift_norm = float(np.abs(val).max())
    return {"omega": base, "omega_shifted": moved,
            "omega_change": abs(moved - base),
            "potential_shift_scale": shift_norm}


# -- gauge directions -----------------------------------------------------------


def gauge_degeneracy_check(delta_x_tangential, partner_phi, geom: GeometryCache) -> dict:
    """Decompose a tangential variation and measure its current content.

    A purely tangential dX is a worldvolume reparametrisation: its
    normal projection and every current built against a partner
    perturbation must vanish to rounding.  Report-only.
    """
    phi_a, phi_i = decompose(delta_x_tangential, geom)
    dx = np.asarray(delta_x_tangential, dtype=float)
    scale = float(np.abs(dx).max()) + 1e-300
    partner = _check_normal(partner_phi, geom)
    partner_scale = float(np.abs(partner).max()) + 1e-300

    j_dng = dng_potential_pair(phi_i, partner, geom)
    j_adj = qec_current_adjoint_pair(phi_i, partner, geom)
    j_pot = qec_current_from_potential(phi_i, partner, geom)
    cur_scale = partner_scale * (1.0 + float(np.abs(geom.sqrtg).max()))
    return {
        "normal_residual": float(np.abs(phi_i).max()) / scale,
        "dng_current_max": float(np.abs(j_dng.data).max()) / cur_scale,
        "qec_adjoint_current_max": float(np.abs(j_adj.data).max()) / cur_scale,
        "qec_potential_current_max": float(np.abs(j_pot.data).max()) / cur_scale,
        "tangential_scale": float(np.abs(phi_a).max()),
    }
