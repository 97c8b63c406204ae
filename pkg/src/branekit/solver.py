"""Extremal-surface relaxation and spectral utilities.

``relax_dng`` drives an embedding to a minimal worldvolume by damped
normal flow: X <- X - tau K^i n_i away from fixed boundary nodes.  The
discrete area is required to be non-increasing between accepted steps;
a step that raises it is rolled back and the step size halved.

``solve_jacobi_kernel`` extracts near-null eigenvectors of an assembled
linearised operator, orthonormalised in the measure-weighted inner
product.  ``convergence_study`` fits the refinement order of any scalar
error against a grid ladder and flags rounding-floor or non-monotone
data instead of forcing a fit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .background import BackgroundModel
from .errors import ConvergenceError, DegenerateMetricError
from .frame_geometry import GeometryCache, build_geometry
from .linearized import DiscreteOperator, assemble
from .worldvolume import Embedding, integrate_scalar

AREA_SLACK = 1e-14
EXACT_FLOOR = 1e-12


@dataclass(frozen=True)
class RelaxParams:
    """Flow controls; `fixed_mask` marks Dirichlet nodes (shape = grid)."""

    step: float
    max_iters: int = 20_000
    target: float = 1e-8
    fixed_mask: np.ndarray = None
    min_step: float = 1e-12

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("flow step must be positive")


@dataclass
class RelaxResult:
    embedding: Embedding
    residuals: list
    areas: list
    converged: bool
    final_step: float

    @property
    def final_residual(self) -> float:
        return self.residuals[-1]


def _corner_offsets(d: int):
    out = [()]
    for _ in range(d):
        out = [o + (0,) for o in out] + [o + (1,) for o in out]
    return out


def _corner_view(x: np.ndarray, grid, offset):
    """Values of a node field at cell corners with the given 0/1 offset."""
    out = x
    for a, o in enumerate(offset):
        n = grid.sizes[a]
        if grid.periodic[a]:
            out = np.roll(out, -o, axis=a)
        else:
            sl = [slice(None)] * out.ndim
            sl[a] = slice(o, n - 1 + o)
            out = out[tuple(sl)]
    return out


def _scatter_cells(contrib: np.ndarray, grid, offset) -> np.ndarray:
    """Accumulate a per-cell array onto nodes at cell+offset."""
    out = np.zeros(grid.shape + contrib.shape[len(contrib.shape) - (contrib.ndim - grid.dim):], dtype=float)
    src = contrib
    idx = [slice(None)] * out.ndim
    for a, o in enumerate(offset):
        n = grid.sizes[a]
        if grid.periodic[a]:
            src = np.roll(src, o, axis=a)
        else:
            idx[a] = slice(o, n - 1 + o)
    out[tuple(idx)] += src
    return out


def _area_and_flow(emb: Embedding, model: BackgroundModel, free: np.ndarray):
    """Piecewise-bilinear cell area, its exact node gradient as a descent
    direction, and the residual |K| on free nodes.

    Cell tangents are edge-averaged forward differences, the ambient
    metric is evaluated at the cell barycentre.  This discrete area is
    coercive (zigzag modes raise it), so the guarded descent cannot
    stall or collapse; its minimisers carry mean curvature O(h^2).
    """
    grid = emb.grid
    x = emb.data
    model.require_in_domain(x)
    d = grid.dim
    offsets = _corner_offsets(d)

    corners = [_corner_view(x, grid, o) for o in offsets]
    xbar = sum(corners) / len(corners)
    tangents = []
    for a in range(d):
        plus = sum(c for o, c in zip(offsets, corners) if o[a] == 1)
        minus = sum(c for o, c in zip(offsets, corners) if o[a] == 0)
        tangents.append((plus - minus) / (grid.spacings[a] * 2 ** (d - 1)))
    e = np.stack(tangents, axis=-2)                    # (cells, a, N)
    g = model.metric(xbar)
    gamma = np.einsum("...am,...mn,...bn->...ab", e, g, e)
    det = np.linalg.det(gamma)
    if not np.all(np.isfinite(det)) or np.any(np.abs(det) < 1e-300):
        raise DegenerateMetricError("degenerate flow cell")
    sq = np.sqrt(np.abs(det))
    vcell = float(np.prod(grid.spacings))
    area = vcell * float(np.sum(sq))

    gamma_inv = np.linalg.inv(gamma)
    q = vcell * sq[..., None, None] * np.einsum(
        "...ab,...bm,...mn->...an", gamma_inv, e, g)   # (cells, a, N) covector
    lcg = model.log_conformal_gradient(xbar)
    rbar = (vcell * d) * sq[..., None] * lcg if lcg is not None else None

    grad = np.zeros(grid.shape + x.shape[-1:])
    lump = np.zeros(grid.shape)
    for o in offsets:
        contrib = 0.0
        for a in range(d):
            sign = 1.0 if o[a] == 1 else -1.0
            contrib = contrib + sign / (grid.spacings[a] * 2 ** (d - 1)) * q[..., a, :]
        if rbar is not None:
            contrib = contrib + rbar / len(offsets)
        grad += _scatter_cells(contrib, grid, o)
        lump += _scatter_cells(vcell * sq / len(offsets), grid, o)

    gnode = model.metric(x)
    v = np.einsum("...mn,...n->...m", model.inverse_metric(x), grad) / lump[..., None]
    from .worldvolume import gradient_stack
    from .frame_geometry import induced_metric
    en = gradient_stack(x, grid)
    _, gamma_inv_n, _ = induced_metric(en, gnode)
    coeff = np.einsum("...cb,...bm,...mn,...n->...c", gamma_inv_n, en, gnode, v)
    v_norm = v - np.einsum("...c,...cm->...m", coeff, en)
    norm2 = np.einsum("...m,...mn,...n->...", v_norm, gnode, v_norm)
    resid = float(np.sqrt(np.abs(norm2[free]).max()))
    return area, -v_norm, resid


def relax_dng(emb0: Embedding, model: BackgroundModel, params: RelaxParams) -> RelaxResult:
    """Relax toward K^i = 0 with area-monotone damped normal flow.

    Raises :class:`ConvergenceError` when the step collapses below
    `min_step`; hitting `max_iters` returns the best iterate with
    ``converged=False``.
    """
    grid = emb0.grid
    free = np.ones(grid.shape, dtype=bool)
    if params.fixed_mask is not None:
        mask = np.asarray(params.fixed_mask, dtype=bool)
        if mask.shape != grid.shape:
            raise ValueError("fixed_mask shape must equal the grid shape")
        free = ~mask
    elif not all(grid.periodic):
        raise ValueError("non-periodic relaxation needs a fixed boundary mask")

    x = emb0.data.copy()
    tau = params.step
    area, flow, resid = _area_and_flow(Embedding(grid, x), model, free)
    areas = [area]
    residuals = [resid]
    converged = resid <= params.target

    it = 0
    accepted_streak = 0
    tau_cap = 8.0 * params.step
    while not converged and it < params.max_iters:
        it += 1
        x_new = x + tau * flow * free[..., None]
        try:
            area_new, flow_new, resid_new = _area_and_flow(Embedding(grid, x_new), model, free)
        except Exception:
            tau *= 0.5
            accepted_streak = 0
            if tau < params.min_step:
                raise ConvergenceError("flow step collapsed on a failing geometry")
            continue
        if area_new > area + AREA_SLACK * max(1.0, abs(area)):
            tau *= 0.5
            accepted_streak = 0
            if tau < params.min_step:
                raise ConvergenceError("flow step collapsed without reaching target")
            continue
        x, area, flow, resid = x_new, area_new, flow_new, resid_new
        areas.append(area)
        residuals.append(resid)
        converged = resid <= params.target
        # cautious acceleration: long accepted streaks earn a larger step
        accepted_streak += 1
        if accepted_streak >= 10 and tau < tau_cap:
            tau = min(tau * 1.1, tau_cap)
            accepted_streak = 0

    return RelaxResult(Embedding(grid, x), residuals, areas, converged, tau)


# -- kernels ------------------------------------------------------------------


def _narrow_quadratic(field: np.ndarray, geom: GeometryCache) -> np.ndarray:
    """Compact per-axis second differences over periodic axes; the wide
    composed stencil is blind to near-Nyquist modes, this one is not."""
    out = np.zeros_like(field)
    for a in range(geom.dim):
        if not geom.grid.periodic[a]:
            continue
        h2 = geom.grid.spacings[a] ** 2
        out = out - (np.roll(field, -1, axis=a) - 2.0 * field
                     + np.roll(field, 1, axis=a)) / h2
    return out


def _drop_aliased(candidates: list, geom: GeometryCache, w: np.ndarray) -> list:
    """Split a near-null subspace into smooth and near-Nyquist directions.

    Degenerate eigen-solves return arbitrary mixtures, so the aliasing
    content is classified on the subspace: diagonalise the compact
    second-difference form and keep directions whose Rayleigh quotient
    stays far below the Nyquist scale 4/h^2.
    """
    if not candidates or not any(geom.grid.periodic):
        return candidates
    shape = geom.grid.shape + (geom.codim,)
    vecs = np.stack(candidates, axis=1)              # (dof, k)
    qcols = np.stack(
        [(_narrow_quadratic(v.reshape(shape), geom)).ravel() for v in candidates],
        axis=1)
    form = vecs.T @ (w[:, None] * qcols)
    form = 0.5 * (form + form.T)
    gram = vecs.T @ (w[:, None] * vecs)
    vals, coef = scipy.linalg.eigh(form, gram)
    h = min(s for s, p in zip(geom.grid.spacings, geom.grid.periodic) if p)
    cutoff = 1.0 / h
    keep = [coef[:, k] for k in range(len(vals)) if abs(vals[k]) <= cutoff]
    return [vecs @ c for c in keep]


def solve_jacobi_kernel(geom: GeometryCache, kind: str = "jacobi",
                        num_eigs: int = 8, threshold: float = None,
                        dealias: bool = True):
    """Near-null eigenvectors of the assembled operator.

    Returns (kernel_fields, eigenvalues_head, threshold): fields of
    shape (S, C) with |A phi| <= threshold, orthonormal in the
    measure-weighted inner product; eigenvalues_head lists the num_eigs
    smallest-magnitude eigenvalues (real parts, sorted by magnitude).

    `dealias` drops near-Nyquist eigenvectors: the wide composed
    first-derivative stencil annihilates the highest resolvable modes,
    which otherwise show up as spurious kernel directions.
    """
    op = assemble(geom, kind)
    tau = op.kernel_threshold() if threshold is None else threshold
    n = op.num_dof
    if n <= 600:
        vals, vecs = scipy.linalg.eig(op.matrix.toarray())
    else:
        k = min(max(num_eigs, 6), n - 2)
        v0 = np.full(n, 1.0 / np.sqrt(n))
        vals, vecs = scipy.sparse.linalg.eigs(op.matrix, k=k, sigma=0.0, v0=v0)
    order = np.argsort(np.abs(vals), kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]

    head = [float(np.real(v)) for v in vals[:num_eigs]]
    w = op.measure_vector()
    shape = geom.grid.shape + (geom.codim,)
    raw = [np.real(vecs[:, col]) for col in range(vecs.shape[1])
           if np.abs(vals[col]) <= tau]
    if dealias:
        raw = _drop_aliased(raw, geom, w)
    kernel = []
    for v in raw:
        for u in kernel:
            v = v - u * np.sum(w * u * v)
        nrm = np.sqrt(np.sum(w * v * v))
        if nrm < 1e-10:
            continue
        kernel.append(v / nrm)
    fields = [v.reshape(shape) for v in kernel]
    return fields, head, tau


# -- refinement-order fits ------------------------------------------------------


@dataclass(frozen=True)
class StudyResult:
    scales: tuple
    errors: tuple
    order: float
    constant: float
    flag: str  # "fit", "exact", "non-monotone"

    @property
    def fitted(self) -> bool:
        return self.flag == "fit"


def convergence_study(evaluator, scales) -> StudyResult:
    """Least-squares slope of log error against log (1/scale).

    `evaluator(scale)` returns the error of some quantity on the grid
    refined by integer `scale`.  Errors at the rounding floor are
    flagged "exact"; non-monotone ladders are flagged without a fit.
    """
    scales = tuple(int(s) for s in scales)
    if len(scales) < 3:
        raise ValueError("need at least three ladder levels")
    errors = tuple(float(evaluator(s)) for s in scales)
    if max(errors) <= EXACT_FLOOR:
        return StudyResult(scales, errors, float("nan"), 0.0, "exact")
    pairs = list(zip(errors, errors[1:]))
    if any(e2 >= e1 for e1, e2 in pairs):
        return StudyResult(scales, errors, float("nan"), 0.0, "non-monotone")
    xs = np.log([1.0 / s for s in scales])
    ys = np.log(errors)
    slope, intercept = np.polyfit(xs, ys, 1)
    return StudyResult(scales, errors, float(slope), float(np.exp(intercept)), "fit")
