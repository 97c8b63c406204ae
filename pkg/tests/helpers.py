"""Shared builders and independent oracles for the test suite."""

import math

import numpy as np

from branekit.background import BackgroundModel
from branekit.frame_geometry import build_geometry
from branekit.worldvolume import Embedding, GridSpec, sample_parametrization

FLAT3 = BackgroundModel("flat", (1.0, 1.0, 1.0))
FLAT4 = BackgroundModel("flat", (1.0, 1.0, 1.0, 1.0))
MINK4 = BackgroundModel("flat", (-1.0, 1.0, 1.0, 1.0))
SPHERE2 = BackgroundModel("constant_curvature", (1.0, 1.0), 1.0)
SPHERE4 = BackgroundModel("constant_curvature", (1.0, 1.0, 1.0, 1.0), 1.0)
HYPER3 = BackgroundModel("constant_curvature", (1.0, 1.0, 1.0), -1.0)


# -- geometry builders --------------------------------------------------------


def sphere_band(n_theta=48, n_phi=None, radius=1.0, theta0=0.2, reparam=0.0):
    """Round-sphere band; `reparam` bends the theta coordinate so sampled
    fields stop being discretely exact (useful for genuine order fits)."""
    n_phi = n_phi or n_theta
    grid = GridSpec((n_theta, n_phi),
                    ((np.pi - 2 * theta0) / (n_theta - 1), 2 * np.pi / n_phi),
                    (False, True), (theta0, 0.0))

    def fn(s, p):
        th = s + reparam * np.sin(2 * s)
        return np.stack([radius * np.sin(th) * np.cos(p),
                         radius * np.sin(th) * np.sin(p),
                         radius * np.cos(th)], axis=-1)

    emb = sample_parametrization(fn, grid, FLAT3)
    return grid, build_geometry(emb, FLAT3)


def catenoid_band(n_u=48, n_v=None, half=1.0):
    n_v = n_v or n_u
    grid = GridSpec((n_u, n_v), (2 * np.pi / n_u, 2 * half / (n_v - 1)),
                    (True, False), (0.0, -half))
    emb = sample_parametrization(
        lambda u, v: np.stack([np.cosh(v) * np.cos(u),
                               np.cosh(v) * np.sin(u), v], axis=-1),
        grid, FLAT3)
    return grid, build_geometry(emb, FLAT3)


def cylinder_band(n=48, radius=1.0, length=1.0):
    grid = GridSpec((n, n + 1), (2 * np.pi / n, length / n), (True, False))
    emb = sample_parametrization(
        lambda t, z: np.stack([radius * np.cos(t), radius * np.sin(t), z], axis=-1),
        grid, FLAT3)
    return grid, build_geometry(emb, FLAT3)


def flat_patch(n=33, ambient=3, extent=1.0):
    model = FLAT3 if ambient == 3 else FLAT4
    grid = GridSpec((n, n), (extent / (n - 1), extent / (n - 1)), (False, False))

    def fn(x, y):
        zeros = np.zeros_like(x)
        return np.stack([x, y] + [zeros] * (ambient - 2), axis=-1)

    emb = sample_parametrization(fn, grid, model)
    return grid, build_geometry(emb, model)


def torus_surface(n=48, major=2.0, minor=0.5):
    grid = GridSpec((n, n), (2 * np.pi / n, 2 * np.pi / n), (True, True))
    emb = sample_parametrization(
        lambda u, v: np.stack([(major + minor * np.cos(v)) * np.cos(u),
                               (major + minor * np.cos(v)) * np.sin(u),
                               minor * np.sin(v)], axis=-1),
        grid, FLAT3)
    return grid, build_geometry(emb, FLAT3)


def great_circle(n=96):
    """Closed geodesic |x| = 2 of the kappa=+1 conformal chart (N=2)."""
    grid = GridSpec((n,), (2 * np.pi / n,), (True,))
    emb = sample_parametrization(
        lambda t: np.stack([2.0 * np.cos(t), 2.0 * np.sin(t)], axis=-1),
        grid, SPHERE2)
    return grid, build_geometry(emb, SPHERE2)


def great_sphere(n=32, theta0=0.25):
    """Equatorial (totally geodesic) 2-sphere inside the kappa=+1 chart of S^3."""
    grid = GridSpec((n, n), ((np.pi - 2 * theta0) / (n - 1), 2 * np.pi / n),
                    (False, True), (theta0, 0.0))
    emb = sample_parametrization(
        lambda t, p: np.stack([2 * np.sin(t) * np.cos(p),
                               2 * np.sin(t) * np.sin(p),
                               2 * np.cos(t),
                               np.zeros_like(t)], axis=-1),
        grid, SPHERE4)
    return grid, build_geometry(emb, SPHERE4)


def static_string(n=33, extent=1.0):
    grid = GridSpec((n, n), (extent / (n - 1), extent / (n - 1)), (False, False))
    emb = sample_parametrization(
        lambda t, s: np.stack([t, s, np.zeros_like(t), np.zeros_like(t)], axis=-1),
        grid, MINK4)
    return grid, build_geometry(emb, MINK4)


def line4(n=33):
    grid = GridSpec((n,), (1.0 / (n - 1),), (False,))
    z = lambda t: np.zeros_like(t)
    emb = sample_parametrization(
        lambda t: np.stack([t, z(t), z(t), z(t)], axis=-1), grid, FLAT4)
    return grid, build_geometry(emb, FLAT4)


def helix_line(n=65, radius=1.0, pitch=0.5):
    grid = GridSpec((n,), (4.0 / (n - 1),), (False,))
    emb = sample_parametrization(
        lambda t: np.stack([radius * np.cos(t), radius * np.sin(t), pitch * t], axis=-1),
        grid, FLAT3)
    return grid, build_geometry(emb, FLAT3)


# -- independent finite-difference oracles -------------------------------------


def fd_christoffel(model, x, h):
    """Gamma from centered differences of the metric (one step size)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    dg = np.zeros((n, n, n))
    for s in range(n):
        e = np.zeros(n)
        e[s] = h
        dg[s] = (model.metric(x + e) - model.metric(x - e)) / (2 * h)
    ginv = model.inverse_metric(x)
    # dg[s, m, n] = d_s g_{mn}; Gamma^m_{nr} = g^{ms}(d_n g_{sr} + d_r g_{sn} - d_s g_{nr})/2
    combo = (np.einsum("nsr->snr", dg) + np.einsum("rsn->snr", dg) - dg)
    return 0.5 * np.einsum("ms,snr->mnr", ginv, combo)


def fd_christoffel_richardson(model, x, h=1e-3):
    c1 = fd_christoffel(model, x, h)
    c2 = fd_christoffel(model, x, h / 2)
    return (4.0 * c2 - c1) / 3.0


def fd_riemann(model, x, h):
    """All-lower Riemann from centered differences of the analytic
    connection: R^l_{s m n} = d_m G^l_{n s} - d_n G^l_{m s} + G G - G G."""
    x = np.asarray(x, dtype=float)
    n = x.size
    dgam = np.zeros((n, n, n, n))  # dgam[m] = d_m Gamma
    for m in range(n):
        e = np.zeros(n)
        e[m] = h
        dgam[m] = (model.christoffel(x + e) - model.christoffel(x - e)) / (2 * h)
    gam = model.christoffel(x)
    rup = (np.einsum("mlns->lsmn", dgam) - np.einsum("nlms->lsmn", dgam)
           + np.einsum("lme,ens->lsmn", gam, gam)
           - np.einsum("lne,ems->lsmn", gam, gam))
    return np.einsum("la,asmn->lsmn", model.metric(x), rup)


def fd_riemann_richardson(model, x, h=1e-3):
    r1 = fd_riemann(model, x, h)
    r2 = fd_riemann(model, x, h / 2)
    return (4.0 * r2 - r1) / 3.0


def fd_of_geometry(geom, phi, eps, quantity):
    """Centered difference of `quantity(geom)` under X -> X + eps n phi."""
    from branekit.deformation import normal_push

    gp = build_geometry(normal_push(geom, phi, eps), geom.model)
    gm = build_geometry(normal_push(geom, phi, -eps), geom.model)
    return (quantity(gp) - quantity(gm)) / (2.0 * eps)


def eps_order(values, epsilons):
    """Slope of log|fd(eps) - fd(eps/2)| vs log eps: isolates the O(eps)
    term from any eps-independent discretisation floor."""
    diffs = [np.abs(values[i] - values[i + 1]).max() for i in range(len(values) - 1)]
    xs = np.log(epsilons[:-1])
    ys = np.log(diffs)
    return float(np.polyfit(xs, ys, 1)[0])


def bump_window(v, half=0.7):
    """Smooth compactly supported mollifier window."""
    w = np.zeros_like(v)
    inside = np.abs(v) < half
    w[inside] = np.exp(-1.0 / (1.0 - (v[inside] / half) ** 2))
    return w


def weighted_inner(u1, u2, geom):
    return float(np.sum(geom.weights * geom.sqrtg
                        * np.einsum("...i,...i->...", u1, u2)))


def fit_order(errors, scales):
    xs = np.log([1.0 / s for s in scales])
    return float(np.polyfit(xs, np.log(errors), 1)[0])
