"""Frames and curvature data of an embedded worldvolume.

``build_geometry`` evaluates, once per embedding, everything downstream
modules need per node:

* tangent frame e_a^mu = d_a X^mu and induced metric gamma_ab,
* an orthonormal spacelike normal frame n_i^mu,
* ambient directional derivatives D_a e_b (with the background
  connection), worldvolume connection coefficients, the second
  fundamental form K_ab^i, its trace K^i, and the normal-bundle twist
  potential omega_a^{ij},
* projected ambient curvature blocks (see below).

Sign conventions, fixed here and relied on everywhere else:

* K_ab^i = -g(D_a e_b, n^i); the outward unit normal of a round sphere
  of radius r then gives K^i = +D/r.
* omega_a^{ij} = g(D_a n^i, n^j), antisymmetrised in (i, j).
* ``riem_trace``   A[i,j]     = R_{mnpq} n_j^m e_a^n e^{a p} n^{i q}
  ``riem_tangent`` B[a,b,i,j] = R_{mnpq} n^{j m} e_a^n e_b^p n^{i q}
  ``riem_normal``  C[a,i,j,k] = R_{mnpq} e_a^m n_k^n n^{j p} n^{i q}
  with R the all-lower background Riemann tensor of
  :meth:`BackgroundModel.riemann`.  On a constant-curvature background
  A = -kappa*D*delta, B[a,b] = -kappa*gamma_ab*delta, C = 0.  With these
  values the linearised extremal-surface operator on a closed geodesic
  of the unit sphere is d^2/ds^2 + 1, whose kernel is spanned by sin(s)
  and cos(s); end-to-end tests pin the signs this way.

Normal frames: for codimension 1 the normal is the metric dual of the
tangent cofactor vector, oriented so that det(e_1, ..., e_D, n) > 0
(continuous on orientable patches, outward on the standard sphere
chart).  For higher codimension a deterministic Gram-Schmidt sweep over
the canonical ambient axes is used, skipping candidates whose residual
norm falls below 1e-6.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .background import BackgroundModel
from .errors import DegenerateMetricError, NormalFrameError, ShapeError
from .worldvolume import Embedding, GridSpec, _diff_array, gradient_stack

_GS_THRESHOLD = 1e-6
_DET_FLOOR = 1e-14


@dataclass
class GeometryCache:
    """Per-node geometric data of one embedding (read-only after build)."""

    grid: GridSpec
    model: BackgroundModel
    x: np.ndarray            # (S, N)
    g: np.ndarray            # (S, N, N) ambient metric at X
    ginv: np.ndarray         # (S, N, N)
    chris: np.ndarray        # (S, N, N, N) ambient connection at X
    tangent: np.ndarray      # (S, D, N) e_a^mu
    gamma: np.ndarray        # (S, D, D) induced metric
    gamma_inv: np.ndarray    # (S, D, D)
    sqrtg: np.ndarray        # (S,) sqrt|det gamma|
    tangent_up: np.ndarray   # (S, D, N) e^{a mu} = gamma^{ab} e_b^mu
    normal: np.ndarray       # (S, C, N) n_i^mu
    normal_low: np.ndarray   # (S, C, N) n^i_mu (ambient index lowered)
    dee: np.ndarray          # (S, D, D, N) D_a e_b
    conn: np.ndarray         # (S, D, D, D) worldvolume connection gamma_ab^c
    second: np.ndarray       # (S, D, D, C) K_ab^i
    mean: np.ndarray         # (S, C) K^i
    twist: np.ndarray        # (S, D, C, C) omega_a^{ij}
    riem_trace: np.ndarray   # (S, C, C)
    riem_tangent: np.ndarray # (S, D, D, C, C)
    riem_normal: np.ndarray  # (S, D, C, C, C)
    weights: np.ndarray      # (S,) quadrature weights

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def codim(self) -> int:
        return self.normal.shape[self.grid.dim]

    @property
    def ambient_dim(self) -> int:
        return self.x.shape[-1]

    def second_up(self) -> np.ndarray:
        """K^{ab i}, both worldvolume slots raised."""
        return np.einsum("...ac,...bd,...cdi->...abi",
                         self.gamma_inv, self.gamma_inv, self.second)

    def second_sq(self) -> np.ndarray:
        """(K K)^i_j = K_ab^i K^{ab}_j, shape (S, C, C); exactly symmetric."""
        return np.einsum("...abi,...abj->...ij", self.second, self.second_up())


# -- frames -------------------------------------------------------------------


def tangent_frame(emb: Embedding, model: BackgroundModel = None) -> np.ndarray:
    """e_a^mu = d_a X^mu, shape (S, D, N)."""
    return gradient_stack(emb.data, emb.grid)


def induced_metric(tangent: np.ndarray, g: np.ndarray):
    """(gamma_ab, gamma^ab, sqrt|det gamma|) from tangents and ambient metric."""
    gamma = np.einsum("...am,...mn,...bn->...ab", tangent, g, tangent)
    gamma = 0.5 * (gamma + np.swapaxes(gamma, -1, -2))
    det = np.linalg.det(gamma)
    if not np.all(np.isfinite(det)) or np.any(np.abs(det) < _DET_FLOOR):
        raise DegenerateMetricError("induced metric degenerate at some node")
    return gamma, np.linalg.inv(gamma), np.sqrt(np.abs(det))


def _codim_one_normal(tangent, g, ginv):
    """Oriented unit normal for codimension 1 via the tangent cofactor dual."""
    n = tangent.shape[-1]
    cols = []
    for nu in range(n):
        minor = np.delete(tangent, nu, axis=-1)
        cols.append(((-1.0) ** nu) * np.linalg.det(minor))
    w = np.stack(cols, axis=-1)                      # covector annihilating tangents
    v = np.einsum("...mn,...n->...m", ginv, w)
    nrm2 = np.einsum("...m,...m->...", w, v)
    if np.any(nrm2 <= 0):
        raise NormalFrameError("codimension-1 normal is not spacelike")
    v = v / np.sqrt(nrm2)[..., None]
    frame = np.concatenate([tangent, v[..., None, :]], axis=-2)
    sign = np.sign(np.linalg.det(frame))
    if np.any(sign == 0):
        raise NormalFrameError("degenerate frame while orienting the normal")
    return (v * sign[..., None])[..., None, :]


def _gs_candidate(k, tangent, e_low, gamma_inv, g, found):
    """Canonical axis k minus its tangential part and accepted normals."""
    shape = tangent.shape[:-2]
    n = tangent.shape[-1]
    v = np.zeros(shape + (n,))
    v[..., k] = 1.0
    coeff = np.einsum("...ab,...b->...a", gamma_inv, e_low[..., k])
    v = v - np.einsum("...a,...am->...m", coeff, tangent)
    for u in found:
        proj = np.einsum("...m,...mn,...n->...", u, g, v)
        v = v - proj[..., None] * u
    nrm2 = np.einsum("...m,...mn,...n->...", v, g, v)
    return v, nrm2


def _gram_schmidt_normals(tangent, g, gamma_inv, codim):
    """Axis-ordered Gram-Schmidt normals; vectorised with per-node fallback."""
    shape = tangent.shape[:-2]
    n = tangent.shape[-1]
    e_low = np.einsum("...am,...mn->...an", tangent, g)

    found = []
    mixed = False
    for k in range(n):
        if len(found) == codim:
            break
        v, nrm2 = _gs_candidate(k, tangent, e_low, gamma_inv, g, found)
        ok = nrm2 > _GS_THRESHOLD**2
        if np.all(ok):
            found.append(v / np.sqrt(nrm2)[..., None])
        elif np.any(ok):
            mixed = True
            break
    if not mixed:
        if len(found) < codim:
            raise NormalFrameError(
                f"found {len(found)} of {codim} independent spacelike normals"
            )
        return np.stack(found, axis=-2)

    # usable axis set varies across nodes: construct frame node by node
    flat_t = tangent.reshape(-1, tangent.shape[-2], n)
    flat_g = g.reshape(-1, n, n)
    flat_gi = gamma_inv.reshape(-1, gamma_inv.shape[-1], gamma_inv.shape[-1])
    out = np.empty((flat_t.shape[0], codim, n))
    for idx in range(flat_t.shape[0]):
        tn, gn, gin = flat_t[idx], flat_g[idx], flat_gi[idx]
        eln = tn @ gn
        got = []
        for k in range(n):
            if len(got) == codim:
                break
            v = np.zeros(n)
            v[k] = 1.0
            v = v - (gin @ eln[:, k]) @ tn
            for u in got:
                v = v - (u @ gn @ v) * u
            nrm2 = v @ gn @ v
            if nrm2 > _GS_THRESHOLD**2:
                got.append(v / np.sqrt(nrm2))
        if len(got) < codim:
            raise NormalFrameError("node-level normal frame construction failed")
        out[idx] = np.stack(got)
    return out.reshape(shape + (codim, n))


def normal_frame(tangent: np.ndarray, g: np.ndarray, ginv: np.ndarray,
                 gamma_inv: np.ndarray) -> np.ndarray:
    """Orthonormal spacelike normals n_i^mu, shape (S, C, N)."""
    d = tangent.shape[-2]
    n = tangent.shape[-1]
    codim = n - d
    if codim < 1:
        raise NormalFrameError("embedding has no normal directions")
    if codim == 1:
        return _codim_one_normal(tangent, g, ginv)
    return _gram_schmidt_normals(tangent, g, gamma_inv, codim)


# -- cache build --------------------------------------------------------------


def ambient_derivative(vec: np.ndarray, geom: "GeometryCache") -> np.ndarray:
    """D_a v^mu along the worldvolume for an ambient-vector field.

    `vec` has shape (S, extra..., N); result is (S, D, extra..., N).
    """
    grid = geom.grid
    gd = grid.dim
    dv = gradient_stack(vec, grid)                     # (S, a, extra..., N)
    extra_shape = vec.shape[gd:-1]
    q = int(np.prod(extra_shape)) if extra_shape else 1
    vec2 = vec.reshape(grid.shape + (q, vec.shape[-1]))
    gam = np.einsum("...mnp,...an->...amp", geom.chris, geom.tangent)
    corr = np.einsum("...amp,...qp->...aqm", gam, vec2)
    corr = corr.reshape(grid.shape + (gd,) + extra_shape + (vec.shape[-1],))
    return dv + corr


def build_geometry(emb: Embedding, model: BackgroundModel, normals: np.ndarray = None,
                   light: bool = False) -> GeometryCache:
    """Evaluate all per-node geometry of an embedding.

    `normals`: optional explicit normal frame, overriding the built-in
    construction (used for gauge-rotation studies).  `light` skips the
    twist and curvature blocks; enough for the relaxation loop.
    """
    grid = emb.grid
    x = emb.data
    if emb.ambient_dim != model.dim:
        raise ShapeError("embedding ambient dimension != background dimension")
    if emb.ambient_dim < grid.dim + 1:
        raise ShapeError("need ambient dimension >= worldvolume dimension + 1")
    model.require_in_domain(x)

    g = model.metric(x)
    ginv = model.inverse_metric(x)
    chris = model.christoffel(x)

    e = gradient_stack(x, grid)
    gamma, gamma_inv, sqrtg = induced_metric(e, g)
    e_up = np.einsum("...ab,...bm->...am", gamma_inv, e)

    if normals is None:
        nrm = normal_frame(e, g, ginv, gamma_inv)
    else:
        nrm = np.asarray(normals, dtype=float)
        if nrm.shape != grid.shape + (model.dim - grid.dim, model.dim):
            raise ShapeError("explicit normal frame has wrong shape")
    n_low = np.einsum("...im,...mn->...in", nrm, g)

    # quality gate: orthonormal spacelike normals, orthogonal to tangents
    res_t = np.abs(np.einsum("...am,...im->...ai", e, n_low)).max()
    gram = np.einsum("...im,...jm->...ij", nrm, n_low)
    res_n = np.abs(gram - np.eye(nrm.shape[-2])).max()
    if res_t > 1e-8 or res_n > 1e-8:
        raise NormalFrameError(
            f"normal frame quality insufficient (tangent {res_t:.2e}, gram {res_n:.2e})"
        )

    de = gradient_stack(e, grid)                       # (S, a, b, N)
    if model.is_flat:
        dee = de
    else:
        dee = de + np.einsum("...mnp,...an,...bp->...abm", chris, e, e)
    dee = 0.5 * (dee + np.swapaxes(dee, grid.dim, grid.dim + 1))

    if light:
        conn = np.zeros(grid.shape + (grid.dim,) * 3)
    else:
        conn = np.einsum("...abm,...mn,...cn->...abc", dee, g, e_up)
    second = -np.einsum("...abm,...im->...abi", dee, n_low)
    second = 0.5 * (second + np.swapaxes(second, grid.dim, grid.dim + 1))
    mean = np.einsum("...ab,...abi->...i", gamma_inv, second)

    codim = nrm.shape[-2]
    d = grid.dim
    if light:
        twist = np.zeros(grid.shape + (d, codim, codim))
        a_blk = np.zeros(grid.shape + (codim, codim))
        b_blk = np.zeros(grid.shape + (d, d, codim, codim))
        c_blk = np.zeros(grid.shape + (d, codim, codim, codim))
    else:
        dn = gradient_stack(nrm, grid) + np.einsum(
            "...mnp,...an,...ip->...aim", chris, e, nrm)
        twist = np.einsum("...aim,...mn,...jn->...aij", dn, g, nrm)
        twist = 0.5 * (twist - np.swapaxes(twist, -1, -2))

        if model.is_flat:
            a_blk = np.zeros(grid.shape + (codim, codim))
            b_blk = np.zeros(grid.shape + (d, d, codim, codim))
            c_blk = np.zeros(grid.shape + (d, codim, codim, codim))
        else:
            riem = model.riemann(x)
            b_blk = np.einsum("...mnpq,...jm,...an,...bp,...iq->...abij",
                              riem, nrm, e, e, nrm)
            a_blk = np.einsum("...ab,...abij->...ij", gamma_inv, b_blk)
            c_blk = np.einsum("...mnpq,...am,...kn,...jp,...iq->...aijk",
                              riem, e, nrm, nrm, nrm)

    return GeometryCache(grid, model, x, g, ginv, chris, e, gamma, gamma_inv,
                         sqrtg, e_up, nrm, n_low, dee, conn, second, mean,
                         twist, a_blk, b_blk, c_blk, grid.quad_weights())


def with_normal_frame(geom: GeometryCache, rotation: np.ndarray) -> GeometryCache:
    """Rebuild the cache with normals rotated by an orthogonal matrix field.

    `rotation` is (C, C) or (S, C, C); the new frame is
    n'_i = rotation[i, k] n_k.
    """
    rot = np.asarray(rotation, dtype=float)
    if rot.ndim == 2:
        n_new = np.einsum("ik,...km->...im", rot, geom.normal)
    else:
        n_new = np.einsum("...ik,...km->...im", rot, geom.normal)
    return build_geometry(Embedding(geom.grid, geom.x), geom.model, normals=n_new)


# -- spec-level accessors -----------------------------------------------------


def extrinsic_curvature(geom: GeometryCache) -> np.ndarray:
    return geom.second


def mean_curvature(geom: GeometryCache) -> np.ndarray:
    return geom.mean


def twist_potential(geom: GeometryCache) -> np.ndarray:
    return geom.twist


def projected_riemann(geom: GeometryCache):
    return geom.riem_trace, geom.riem_tangent, geom.riem_normal


# -- covariant calculus -------------------------------------------------------


def _slot_correction(coeff: np.ndarray, src: np.ndarray, gd: int) -> np.ndarray:
    """Contract coeff[S, a, out, k] with src[S, other..., k].

    Returns (S, a, other..., out).  Used for every per-slot connection or
    twist correction.
    """
    other_shape = src.shape[gd:-1]
    q = int(np.prod(other_shape)) if other_shape else 1
    src2 = src.reshape(src.shape[:gd] + (q, src.shape[-1]))
    out = np.einsum("...axk,...qk->...aqx", coeff, src2)
    return out.reshape(out.shape[:gd + 1] + other_shape + (coeff.shape[gd + 1],))


def _slot_coeff(kind: str, geom: GeometryCache) -> np.ndarray:
    """coeff[S, a, out, k] for a covariant correction of one index slot."""
    if kind == "i":
        return -geom.twist
    if kind == "a":
        return -geom.conn
    if kind == "A":
        return np.swapaxes(geom.conn, -1, -2)  # +gamma_{a k}^{out}
    raise ShapeError(f"cannot differentiate index kind {kind!r}")


def normal_cov_derivative(data, kinds: str, geom: GeometryCache) -> np.ndarray:
    """Twist- and connection-covariant derivative.

    `data` has shape (S, slots...) with one slot per character of
    `kinds` ('a' lower worldvolume, 'A' upper worldvolume, 'i' normal
    frame).  The result has shape (S, D, slots...): the new lower
    worldvolume index sits right after the node axes.
    """
    arr = np.asarray(data, dtype=float)
    gd = geom.grid.dim
    if arr.ndim != gd + len(kinds):
        raise ShapeError(f"field rank does not match kinds={kinds!r}")
    out = gradient_stack(arr, geom.grid)
    for p, kind in enumerate(kinds):
        src = np.moveaxis(arr, gd + p, -1)
        corr = _slot_correction(_slot_coeff(kind, geom), src, gd)
        out = out + np.moveaxis(corr, -1, gd + 1 + p)
    return out


def raise_first(data: np.ndarray, geom: GeometryCache) -> np.ndarray:
    """Raise the worldvolume slot that directly follows the node axes."""
    gd = geom.grid.dim
    src = np.moveaxis(data, gd, -1)
    other_shape = src.shape[gd:-1]
    q = int(np.prod(other_shape)) if other_shape else 1
    src2 = src.reshape(src.shape[:gd] + (q, geom.dim))
    out = np.einsum("...ab,...qb->...qa", geom.gamma_inv, src2)
    out = out.reshape(out.shape[:gd] + other_shape + (geom.dim,))
    return np.moveaxis(out, -1, gd)


def laplacian(data, kinds: str, geom: GeometryCache) -> np.ndarray:
    """Divergence-form covariant Laplacian on a field of given kinds.

    Computed as (1/sqrtg) d_a ( sqrtg gamma^{ab} cov_b f ), plus the
    twist/connection corrections of the field's own slots contracted
    against gamma^{ab} cov_b f.  On fully periodic grids this operator
    is self-adjoint to rounding in the measure-weighted inner product.
    """
    arr = np.asarray(data, dtype=float)
    gd = geom.grid.dim
    grad = normal_cov_derivative(arr, kinds, geom)     # (S, b(lo), slots)
    vec = raise_first(grad, geom)                      # (S, a(up), slots)
    extra = arr.ndim - gd
    sq = geom.sqrtg.reshape(geom.grid.shape + (1,) * extra)
    div = 0.0
    for a in range(geom.dim):
        div = div + _diff_array(sq * np.take(vec, a, axis=gd), geom.grid, a)
    out = div / sq
    for p, kind in enumerate(kinds):
        src = np.moveaxis(vec, gd + 1 + p, -1)         # (S, a, other..., k)
        coeff = _slot_coeff(kind, geom)
        other_shape = src.shape[gd + 1:-1]
        q = int(np.prod(other_shape)) if other_shape else 1
        src2 = src.reshape(src.shape[:gd] + (geom.dim, q, src.shape[-1]))
        corr = np.einsum("...axk,...aqk->...qx", coeff, src2)
        corr = corr.reshape(corr.shape[:gd] + other_shape + (coeff.shape[gd + 1],))
        out = out + np.moveaxis(corr, -1, gd + p)
    return out
