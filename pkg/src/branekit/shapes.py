"""Named analytic embeddings and perturbation fields.

The registries back the CLI config (`embedding.name`, perturbation
`kind`) and double as the test-geometry catalog.  Every map receives
the meshgrid coordinate arrays of its grid and returns stacked ambient
components.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .frame_geometry import GeometryCache
from .worldvolume import Embedding, GridSpec, sample_parametrization


def _stack(*comps):
    return np.stack(np.broadcast_arrays(*comps), axis=-1)


def _plane(params):
    pad = int(params.get("ambient_dim", 0))

    def fn(*coords):
        zeros = np.zeros_like(coords[0])
        extra = max(pad - len(coords), 1) if pad else 1
        return _stack(*coords, *([zeros] * extra))

    return fn


def _sphere_band(params):
    r = float(params.get("radius", 1.0))

    def fn(theta, phi):
        return _stack(r * np.sin(theta) * np.cos(phi),
                      r * np.sin(theta) * np.sin(phi),
                      r * np.cos(theta))

    return fn


def _cylinder(params):
    r = float(params.get("radius", 1.0))

    def fn(theta, z):
        return _stack(r * np.cos(theta), r * np.sin(theta), z)

    return fn


def _catenoid(params):
    c = float(params.get("waist", 1.0))

    def fn(u, v):
        rho = c * np.cosh(v / c)
        return _stack(rho * np.cos(u), rho * np.sin(u), v)

    return fn


def _torus(params):
    big = float(params.get("major", 2.0))
    small = float(params.get("minor", 0.5))

    def fn(u, v):
        rho = big + small * np.cos(v)
        return _stack(rho * np.cos(u), rho * np.sin(u), small * np.sin(v))

    return fn


def _clifford_torus(params):
    r = float(params.get("radius", 1.0))

    def fn(u, v):
        return _stack(r * np.cos(u), r * np.sin(u), r * np.cos(v), r * np.sin(v))

    return fn


def _circle(params):
    r = float(params.get("radius", 1.0))
    pad = int(params.get("ambient_dim", 2))

    def fn(t):
        comps = [r * np.cos(t), r * np.sin(t)]
        comps += [np.zeros_like(t)] * (pad - 2)
        return _stack(*comps)

    return fn


def _line(params):
    pad = int(params.get("ambient_dim", 4))

    def fn(t):
        return _stack(t, *([np.zeros_like(t)] * (pad - 1)))

    return fn


def _helix(params):
    r = float(params.get("radius", 1.0))
    pitch = float(params.get("pitch", 0.5))

    def fn(t):
        return _stack(r * np.cos(t), r * np.sin(t), pitch * t)

    return fn


def _static_string(params):
    def fn(t, s):
        zeros = np.zeros_like(t)
        return _stack(t, s, zeros, zeros)

    return fn


def _great_sphere(params):
    # equatorial 2-sphere inside the kappa=+1 conformal chart of S^3
    r = float(params.get("chart_radius", 2.0))

    def fn(theta, phi):
        return _stack(r * np.sin(theta) * np.cos(phi),
                      r * np.sin(theta) * np.sin(phi),
                      r * np.cos(theta),
                      np.zeros_like(theta))

    return fn


def _perturbed_segment(params):
    amp = float(params.get("amplitude", 0.1))
    modes = int(params.get("modes", 1))

    def fn(t):
        t0, t1 = t.min(), t.max()
        u = (t - t0) / (t1 - t0)
        return _stack(t, amp * np.sin(modes * np.pi * u), np.zeros_like(t))

    return fn


def _rings_cylinder(params):
    r = float(params.get("radius", 1.0))
    h = float(params.get("half_height", 0.4))

    def fn(theta, v):
        return _stack(r * np.cos(theta), r * np.sin(theta), h * v)

    return fn


def _annulus_bump(params):
    amp = float(params.get("amplitude", 0.3))

    def fn(rho, theta):
        r0, r1 = rho.min(), rho.max()
        u = (rho - r0) / (r1 - r0)
        z = amp * np.sin(np.pi * u)
        return _stack(rho * np.cos(theta), rho * np.sin(theta), z)

    return fn


PARAMETRIZATIONS = {
    "plane": _plane,
    "sphere_band": _sphere_band,
    "cylinder": _cylinder,
    "catenoid": _catenoid,
    "torus": _torus,
    "clifford_torus": _clifford_torus,
    "circle": _circle,
    "line": _line,
    "helix": _helix,
    "static_string": _static_string,
    "great_sphere": _great_sphere,
    "perturbed_segment": _perturbed_segment,
    "rings_cylinder": _rings_cylinder,
    "annulus_bump": _annulus_bump,
}


def make_embedding(name: str, params: dict, grid: GridSpec, model=None) -> Embedding:
    if name not in PARAMETRIZATIONS:
        raise ConfigError(f"embedding.name: unknown parametrization {name!r}")
    return sample_parametrization(PARAMETRIZATIONS[name](params or {}), grid, model)


# -- perturbations ---------------------------------------------------------------


def _phase_field(grid: GridSpec, kvec, phase: float) -> np.ndarray:
    coords = grid.coords()
    if len(kvec) != grid.dim:
        raise ConfigError("perturbation kvec length must equal the grid dimension")
    out = np.full(grid.shape, float(phase))
    for k, xi in zip(kvec, coords):
        out = out + float(k) * xi
    return out


def make_perturbation(spec: dict, geom: GeometryCache) -> dict:
    """Build {'normal': (S, C)} (plus optional 'tangential': (S, D)) fields."""
    kind = spec.get("kind")
    grid = geom.grid
    c = geom.codim
    comp = int(spec.get("component", 0))
    amp = float(spec.get("amplitude", 1.0))
    normal = np.zeros(grid.shape + (c,))
    tangential = None
    if kind == "constant":
        if not 0 <= comp < c:
            raise ConfigError("perturbation.component out of range")
        normal[..., comp] = amp
    elif kind == "plane_wave":
        if not 0 <= comp < c:
            raise ConfigError("perturbation.component out of range")
        arg = _phase_field(grid, spec.get("kvec", [1] * grid.dim), spec.get("phase", 0.0))
        normal[..., comp] = amp * np.sin(arg)
    elif kind == "gaussian":
        if not 0 <= comp < c:
            raise ConfigError("perturbation.component out of range")
        center = spec.get("center", [0.0] * grid.dim)
        width = float(spec.get("width", 0.5))
        r2 = np.zeros(grid.shape)
        for c0, xi in zip(center, grid.coords()):
            r2 = r2 + (xi - float(c0)) ** 2
        normal[..., comp] = amp * np.exp(-0.5 * r2 / width**2)
    elif kind == "tangential_wave":
        tangential = np.zeros(grid.shape + (grid.dim,))
        if not 0 <= comp < grid.dim:
            raise ConfigError("perturbation.component out of range")
        arg = _phase_field(grid, spec.get("kvec", [1] * grid.dim), spec.get("phase", 0.0))
        tangential[..., comp] = amp * np.sin(arg)
    else:
        raise ConfigError(f"perturbation.kind: unknown kind {kind!r}")
    out = {"normal": normal}
    if tangential is not None:
        out["tangential"] = tangential
    return out
