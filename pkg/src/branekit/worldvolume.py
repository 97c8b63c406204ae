"""Parameter grids, sampled fields, and finite-difference primitives.

The worldvolume is a uniform D-dimensional tensor-product grid with
per-axis periodicity.  All derivative stencils are second order:
centered in the interior and on periodic axes, 3-point one-sided at
non-periodic boundaries.  Integration is the matching tensor-product
trapezoid rule (uniform weights on periodic axes), so that summation
by parts holds exactly on fully periodic grids.

Fields are plain node-major numpy arrays: shape = grid.shape followed
by one axis per tensor slot.  The optional :class:`Field` wrapper tags
those slots with their index kind:

    'a'  worldvolume index, lower
    'A'  worldvolume index, upper
    'i'  normal-frame index (Euclidean, no variance)
    'x'  ambient coordinate index

Index-kind tags matter only to the covariant-derivative machinery in
:mod:`branekit.frame_geometry`; the raw array is always accessible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ChartDomainError, ShapeError

INDEX_KINDS = ("a", "A", "i", "x")


@dataclass(frozen=True)
class GridSpec:
    """Uniform tensor-product grid for the parameter space.

    sizes      nodes per axis (>= 5 on non-periodic axes)
    spacings   grid step per axis (> 0)
    periodic   per-axis wrap flag
    origin     coordinate of node 0 per axis
    """

    sizes: tuple
    spacings: tuple
    periodic: tuple
    origin: tuple = None

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.sizes)
        spacings = tuple(float(h) for h in self.spacings)
        periodic = tuple(bool(p) for p in self.periodic)
        origin = self.origin
        origin = tuple(float(o) for o in origin) if origin is not None else (0.0,) * len(sizes)
        if not (len(sizes) == len(spacings) == len(periodic) == len(origin)):
            raise ValueError("sizes, spacings, periodic, origin must share length")
        if len(sizes) < 1:
            raise ValueError("grid needs at least one axis")
        for n, h, p in zip(sizes, spacings, periodic):
            if h <= 0:
                raise ValueError("grid spacing must be positive")
            if (not p and n < 5) or (p and n < 4):
                raise ValueError("need >= 5 nodes on non-periodic axes (>= 4 periodic)")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "spacings", spacings)
        object.__setattr__(self, "periodic", periodic)
        object.__setattr__(self, "origin", origin)

    @property
    def dim(self) -> int:
        return len(self.sizes)

    @property
    def shape(self) -> tuple:
        return self.sizes

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.sizes))

    def axis_coords(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.spacings[axis] * np.arange(self.sizes[axis])

    def coords(self) -> list:
        """Meshgrid (indexing='ij') of node coordinates, one array per axis."""
        axes = [self.axis_coords(a) for a in range(self.dim)]
        return list(np.meshgrid(*axes, indexing="ij"))

    def axis_weights(self, axis: int) -> np.ndarray:
        h = self.spacings[axis]
        if self.periodic[axis]:
            return np.full(self.sizes[axis], h)
        w = np.full(self.sizes[axis], h)
        w[0] = w[-1] = 0.5 * h
        return w

    def quad_weights(self) -> np.ndarray:
        """Tensor-product trapezoid weights, shape = grid.shape."""
        return _quad_weights_cached(self)

    def scaled(self, factor: int) -> "GridSpec":
        """Refined grid covering the same extent; node counts scale by `factor`.

        On periodic axes the period n*h is preserved; on bounded axes the
        endpoints (n-1)*h are preserved.
        """
        sizes = []
        spacings = []
        for n, h, p in zip(self.sizes, self.spacings, self.periodic):
            m = int(round(n * factor))
            sizes.append(m)
            spacings.append(h * n / m if p else h * (n - 1) / (m - 1))
        return GridSpec(tuple(sizes), tuple(spacings), self.periodic, self.origin)


def _quad_weights_cached(grid: "GridSpec") -> np.ndarray:
    key = (grid.sizes, grid.spacings, grid.periodic)
    hit = _WEIGHT_CACHE.get(key)
    if hit is None:
        out = grid.axis_weights(0)
        for a in range(1, grid.dim):
            out = np.multiply.outer(out, grid.axis_weights(a))
        out.flags.writeable = False
        hit = _WEIGHT_CACHE[key] = out
    return hit


_WEIGHT_CACHE: dict = {}


@dataclass(frozen=True)
class Field:
    """Node-major sampled field with tagged extra index slots."""

    grid: GridSpec
    data: np.ndarray
    kinds: str = ""

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.shape[: self.grid.dim] != self.grid.shape:
            raise ShapeError(
                f"field shape {data.shape} does not start with grid shape {self.grid.shape}"
            )
        if data.ndim != self.grid.dim + len(self.kinds):
            raise ShapeError(
                f"field has {data.ndim - self.grid.dim} index slots, kinds={self.kinds!r}"
            )
        for k in self.kinds:
            if k not in INDEX_KINDS:
                raise ShapeError(f"unknown index kind {k!r}")
        data = data.copy()
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def num_slots(self) -> int:
        return len(self.kinds)


def as_array(f) -> np.ndarray:
    return f.data if isinstance(f, Field) else np.asarray(f, dtype=float)


@dataclass(frozen=True)
class Embedding:
    """Sampled embedding X^mu(xi) over a grid; data shape = grid.shape + (N,)."""

    grid: GridSpec
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.shape[:-1] != self.grid.shape or data.ndim != self.grid.dim + 1:
            raise ShapeError("embedding data must have shape grid.shape + (N,)")
        if not np.all(np.isfinite(data)):
            raise ChartDomainError("embedding contains non-finite coordinates")
        data = data.copy()
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def ambient_dim(self) -> int:
        return self.data.shape[-1]


# -- finite differences ------------------------------------------------------


def _diff_array(data: np.ndarray, grid: GridSpec, axis: int) -> np.ndarray:
    """Second-order first derivative along one grid axis of a raw array."""
    if not 0 <= axis < grid.dim:
        raise ShapeError(f"axis {axis} out of range for D={grid.dim}")
    h = grid.spacings[axis]
    if grid.periodic[axis]:
        return (np.roll(data, -1, axis=axis) - np.roll(data, 1, axis=axis)) / (2.0 * h)

    out = np.empty_like(data)
    sl = [slice(None)] * data.ndim

    def at(idx):
        s = list(sl)
        s[axis] = idx
        return tuple(s)

    out[at(slice(1, -1))] = (data[at(slice(2, None))] - data[at(slice(0, -2))]) / (2.0 * h)
    # one-sided second-order closure whose leading error (+h^2/6 f''') equals
    # the interior centered one: the truncation-error field stays smooth
    # through the boundary, so composed second derivatives remain O(h^2) there
    out[at(0)] = (-4.0 * data[at(0)] + 7.0 * data[at(1)]
                  - 4.0 * data[at(2)] + data[at(3)]) / (2.0 * h)
    out[at(-1)] = (4.0 * data[at(-1)] - 7.0 * data[at(-2)]
                   + 4.0 * data[at(-3)] - data[at(-4)]) / (2.0 * h)
    return out


def axis_stencil_matrix(grid: GridSpec, axis: int) -> np.ndarray:
    """Dense matrix of the one-axis first-derivative stencil (cached).

    Used where the transpose of the derivative is needed (discrete
    functional gradients).
    """
    key = (grid.sizes[axis], grid.spacings[axis], grid.periodic[axis])
    hit = _STENCIL_CACHE.get(key)
    if hit is None:
        n = grid.sizes[axis]
        line = GridSpec((n,), (grid.spacings[axis],), (grid.periodic[axis],))
        hit = _diff_array(np.eye(n), line, 0)
        hit.flags.writeable = False
        _STENCIL_CACHE[key] = hit
    return hit


_STENCIL_CACHE: dict = {}


def apply_axis_matrix(mat: np.ndarray, data: np.ndarray, axis: int) -> np.ndarray:
    """Contract a (n, n) matrix against one axis of `data`."""
    arr = np.moveaxis(data, axis, 0)
    out = np.tensordot(mat, arr, axes=(1, 0))
    return np.moveaxis(out, 0, axis)


def partial_derivative(f, grid: GridSpec = None, axis: int = 0):
    """d f / d xi^axis with the grid's stencil; Field in, Field out."""
    if isinstance(f, Field):
        out = _diff_array(f.data, f.grid, axis)
        return Field(f.grid, out, f.kinds)
    if grid is None:
        raise ShapeError("raw arrays need an explicit grid")
    return _diff_array(np.asarray(f, dtype=float), grid, axis)


def gradient_stack(data: np.ndarray, grid: GridSpec) -> np.ndarray:
    """All partials; result shape = grid.shape + (D,) + extra index shape."""
    cols = [_diff_array(data, grid, a) for a in range(grid.dim)]
    return np.stack(cols, axis=grid.dim)


def coordinate_divergence(vec: np.ndarray, grid: GridSpec) -> np.ndarray:
    """d_a v^a for v of shape grid.shape + (D,) (+ extra trailing slots)."""
    if vec.shape[grid.dim] != grid.dim:
        raise ShapeError("vector field must carry a worldvolume slot right after nodes")
    out = 0.0
    for a in range(grid.dim):
        comp = np.take(vec, a, axis=grid.dim)
        out = out + _diff_array(comp, grid, a)
    return out


# -- quadrature ---------------------------------------------------------------


def integrate_scalar(f, weight=None, grid: GridSpec = None) -> float:
    """Tensor-product trapezoid integral of f (optionally times `weight`)."""
    if isinstance(f, Field):
        grid = f.grid
    if grid is None:
        raise ShapeError("raw arrays need an explicit grid")
    fa = as_array(f)
    if fa.shape != grid.shape:
        raise ShapeError(f"scalar field shape {fa.shape} != grid shape {grid.shape}")
    if weight is not None:
        wa = as_array(weight)
        if wa.shape != grid.shape:
            raise ShapeError("weight shape mismatch")
        fa = fa * wa
    return float(np.sum(fa * grid.quad_weights()))


# -- sampling -----------------------------------------------------------------


def sample_parametrization(map_fn: Callable, grid: GridSpec, model=None) -> Embedding:
    """Evaluate a closed-form map xi -> x at every node.

    `map_fn` receives the meshgrid coordinate arrays (one per axis) and
    must return the stacked ambient components, shape grid.shape + (N,).
    If an ambient `model` is given, every node is checked against its
    chart domain.
    """
    coords = grid.coords()
    pts = np.asarray(map_fn(*coords), dtype=float)
    if pts.shape[: grid.dim] != grid.shape:
        # allow maps that return a leading component axis
        if pts.shape[1:] == grid.shape:
            pts = np.moveaxis(pts, 0, -1)
        else:
            raise ShapeError("parametrization output shape mismatch")
    if model is not None and not np.all(model.in_domain(pts)):
        raise ChartDomainError("parametrization leaves the background chart domain")
    return Embedding(grid, pts)
