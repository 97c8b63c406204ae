"""Finite-difference geometry of embedded worldvolumes.

Core objects: ambient :class:`BackgroundModel` charts, uniform
parameter grids with sampled embeddings, per-node geometry caches
(frames, induced metric, second fundamental form, twist), the
first-order deformation calculus, area and rigidity functionals with
their variations, linearised stability operators, and conserved
symplectic currents evaluated over Cauchy slices.
"""

from .background import BackgroundModel, christoffel_at, metric_at, riemann_at
from .errors import (BraneError, BudgetError, ChartDomainError, ConfigError,
                     ConvergenceError, DegenerateMetricError, NormalFrameError,
                     ShapeError)
from .frame_geometry import (GeometryCache, build_geometry, laplacian,
                             normal_cov_derivative, with_normal_frame)
from .worldvolume import (Embedding, Field, GridSpec, integrate_scalar,
                          partial_derivative, sample_parametrization)

__all__ = [
    "BackgroundModel", "metric_at", "christoffel_at", "riemann_at",
    "GridSpec", "Field", "Embedding", "partial_derivative",
    "integrate_scalar", "sample_parametrization",
    "GeometryCache", "build_geometry", "normal_cov_derivative", "laplacian",
    "with_normal_frame",
    "BraneError", "ChartDomainError", "DegenerateMetricError",
    "NormalFrameError", "ShapeError", "BudgetError", "ConvergenceError",
    "ConfigError",
]

__version__ = "0.1.0"
