"""Linearised operators about (near-)extremal worldvolumes.

``jacobi_apply`` realises the second-order stability operator

    P phi^i = lap phi^i + (KK)^i_j phi^j - A^i_j phi^j,

whose kernel consists of deformation zero modes (translations of the
unit sphere, rotations of a closed geodesic, ...).  The fourth-order
operator governing rigidity-term perturbations about extremal surfaces
is P^2; it is provided both as the literal composition and in the fully
expanded form (products differentiated through), together with the
equivalent mass-matrix form used for consistency checks.

``assemble`` turns either operator into an explicit sparse matrix over
(node x normal-component) degrees of freedom for spectral and
adjointness studies; grids are limited to a 10^4-DOF budget.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse

from .errors import BudgetError, ShapeError
from .frame_geometry import GeometryCache, laplacian, normal_cov_derivative, raise_first
from .deformation import _check_normal

DOF_BUDGET = 10_000

OP_JACOBI = "jacobi"
OP_JACOBI_SQUARE = "jacobi_square"


def mass_matrix(geom: GeometryCache) -> np.ndarray:
    """M^i_j = -(KK)^i_j + A^i_j, symmetric in (i, j)."""
    return -geom.second_sq() + geom.riem_trace


def jacobi_apply(phi, geom: GeometryCache) -> np.ndarray:
    """P phi = lap phi + (KK - A) phi."""
    p = _check_normal(phi, geom)
    coupling = geom.second_sq() - geom.riem_trace
    return laplacian(p, "i", geom) + np.einsum("...ij,...j->...i", coupling, p)


def jacobi_square_composed(phi, geom: GeometryCache) -> np.ndarray:
    """P(P(phi)) with two discrete applications."""
    return jacobi_apply(jacobi_apply(phi, geom), geom)


def _grad_dot(tensor: np.ndarray, phi: np.ndarray, geom: GeometryCache) -> np.ndarray:
    """cov^c[tensor^{ij}] cov_c phi_j, for a normal 2-tensor field."""
    grad_t = normal_cov_derivative(tensor, "ii", geom)          # (S, c, i, j)
    grad_p = raise_first(normal_cov_derivative(phi, "i", geom), geom)  # (S, c(up), j)
    return np.einsum("...cij,...cj->...i", grad_t, grad_p)


def jacobi_square_expanded(phi, geom: GeometryCache) -> np.ndarray:
    """The expanded fourth-order operator, products differentiated through.

    lap lap phi + 2 KK lap phi + 2 cov[KK].cov phi + lap[KK] phi + KK.KK phi
    - 2 A lap phi - 2 cov[A].cov phi - lap[A] phi - A.KK phi - KK.A phi
    + A.A phi.
    """
    p = _check_normal(phi, geom)
    kk = geom.second_sq()
    a = geom.riem_trace
    lap_p = laplacian(p, "i", geom)
    out = laplacian(lap_p, "i", geom)
    out = out + 2.0 * np.einsum("...ij,...j->...i", kk, lap_p)
    out = out + 2.0 * _grad_dot(kk, p, geom)
    out = out + np.einsum("...ij,...j->...i", laplacian(kk, "ii", geom), p)
    out = out + np.einsum("...ik,...kj,...j->...i", kk, kk, p)
    out = out - 2.0 * np.einsum("...ij,...j->...i", a, lap_p)
    out = out - 2.0 * _grad_dot(a, p, geom)
    out = out - np.einsum("...ij,...j->...i", laplacian(a, "ii", geom), p)
    out = out - np.einsum("...ik,...kj,...j->...i", a, kk, p)
    out = out - np.einsum("...ik,...kj,...j->...i", kk, a, p)
    out = out + np.einsum("...ik,...kj,...j->...i", a, a, p)
    return out


def jacobi_square_mass_form(phi, geom: GeometryCache) -> np.ndarray:
    """Same operator written through the mass matrix M = -KK + A:

    lap lap phi - 2 M lap phi - 2 cov[M].cov phi - lap[M] phi + M.M phi.

    Algebraically identical to ``jacobi_square_expanded``; asserting
    their numerical agreement is a regression check on both.
    """
    p = _check_normal(phi, geom)
    m = mass_matrix(geom)
    lap_p = laplacian(p, "i", geom)
    out = laplacian(lap_p, "i", geom)
    out = out - 2.0 * np.einsum("...ij,...j->...i", m, lap_p)
    out = out - 2.0 * _grad_dot(m, p, geom)
    out = out - np.einsum("...ij,...j->...i", laplacian(m, "ii", geom), p)
    out = out + np.einsum("...ik,...kj,...j->...i", m, m, p)
    return out


def dng_jacobi_residual(phi, geom: GeometryCache) -> float:
    """Measure-weighted L2 norm of P phi."""
    p = jacobi_apply(phi, geom)
    dens = geom.sqrtg * np.einsum("...i,...i->...", p, p)
    return float(np.sqrt(np.sum(geom.weights * dens)))


# -- assembled operators -----------------------------------------------------------


@dataclass(frozen=True)
class DiscreteOperator:
    """Sparse matrix form of an operator over (node, normal) DOFs."""

    matrix: sparse.csr_matrix
    geom: GeometryCache
    kind: str

    @property
    def num_dof(self) -> int:
        return self.matrix.shape[0]

    def measure_vector(self) -> np.ndarray:
        """Per-DOF quadrature weight w * sqrtg (normal components share it)."""
        w = (self.geom.weights * self.geom.sqrtg).ravel()
        return np.repeat(w, self.geom.codim)

    def scale(self) -> float:
        """Operator magnitude for kernel thresholds.

        Signed row sums capture the zeroth-order scale (the operator on
        constants); pure-derivative operators with vanishing row sums
        fall back to the h^2-weighted absolute row sums.
        """
        signed = float(np.abs(np.asarray(self.matrix.sum(axis=1))).max())
        h = max(self.geom.grid.spacings)
        absolute = float(np.abs(self.matrix).sum(axis=1).max())
        return max(signed, h * h * absolute)

    def kernel_threshold(self) -> float:
        h = max(self.geom.grid.spacings)
        return 10.0 * h * h * self.scale()


_APPLY = {
    OP_JACOBI: jacobi_apply,
    OP_JACOBI_SQUARE: jacobi_square_expanded,
}


def assemble(geom: GeometryCache, kind: str = OP_JACOBI) -> DiscreteOperator:
    """Column-by-column assembly of an operator into a sparse matrix.

    DOF ordering is node-major (C-order over the grid), normal index
    fastest.  Deterministic; refuses grids above the DOF budget.
    """
    if kind not in _APPLY:
        raise ShapeError(f"unknown operator kind {kind!r}")
    apply_fn = _APPLY[kind]
    c = geom.codim
    ndof = geom.grid.num_nodes * c
    if ndof > DOF_BUDGET:
        raise BudgetError(f"{ndof} degrees of freedom exceed the budget {DOF_BUDGET}")
    shape = geom.grid.shape + (c,)
    rows, cols, vals = [], [], []
    for k in range(ndof):
        basis = np.zeros(ndof)
        basis[k] = 1.0
        out = apply_fn(basis.reshape(shape), geom).ravel()
        nz = np.flatnonzero(out)
        rows.append(nz)
        cols.append(np.full(nz.size, k))
        vals.append(out[nz])
    mat = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(ndof, ndof)).tocsr()
    return DiscreteOperator(mat, geom, kind)


def weighted_matrix(op: DiscreteOperator) -> sparse.csr_matrix:
    """diag(w sqrtg) @ matrix: the bilinear form <u, Op v>."""
    return sparse.diags(op.measure_vector()) @ op.matrix


def symmetry_residual(op: DiscreteOperator, interior: np.ndarray = None) -> float:
    """Max asymmetry of the measure-weighted bilinear form.

    `interior`: optional boolean DOF mask restricting to rows/columns
    away from non-periodic boundaries (exact adjointness needs compactly
    supported arguments).
    """
    b = weighted_matrix(op)
    asym = (b - b.T).tocsr()
    if interior is not None:
        keep = np.flatnonzero(interior)
        asym = asym[keep][:, keep]
    if asym.nnz == 0:
        return 0.0
    return float(np.abs(asym.data).max())


def interior_dof_mask(geom: GeometryCache, margin: int = 3) -> np.ndarray:
    """DOFs at least `margin` nodes from every non-periodic boundary."""
    mask = np.ones(geom.grid.shape, dtype=bool)
    for a in range(geom.dim):
        if geom.grid.periodic[a]:
            continue
        idx = np.arange(geom.grid.sizes[a])
        good = (idx >= margin) & (idx < geom.grid.sizes[a] - margin)
        sl = [None] * geom.dim
        sl[a] = slice(None)
        mask = mask & good[tuple(sl)]
    return np.repeat(mask.ravel(), geom.codim)
