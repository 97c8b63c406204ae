"""Ambient spacetimes with analytic metric, connection, and curvature.

Two model families cover every test geometry at desk scale:

* ``flat``: g = diag(signature), vanishing connection and curvature.
* ``constant_curvature``: the conformally flat chart

      g_{mu nu} = Omega(x)^2 * eta_{mu nu},   Omega = 1 / (1 + kappa*s/4),

  with eta = diag(signature) and s = eta_{mu nu} x^mu x^nu.  One chart
  handles spherical (kappa > 0), flat (kappa = 0) and hyperbolic
  (kappa < 0) geometry; the chart ends where the conformal factor blows
  up (1 + kappa*s/4 <= 0).

Conventions (fixed once, used by every caller):

* all curvature tensors are returned fully lowered; callers raise
  indices with the explicit inverse metric;
* ``riemann`` returns R[m, n, r, s] with
  R_{m n r s} = kappa * (g_{m r} g_{n s} - g_{m s} g_{n r}),
  so the sectional curvature R(u, v, u, v) of an orthonormal plane
  equals kappa.

Points are plain float arrays of shape (..., N); every evaluator is
vectorised over the leading axes and stateless.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ChartDomainError

_DOMAIN_EPS = 1e-12

FLAT = "flat"
CONSTANT_CURVATURE = "constant_curvature"


@dataclass(frozen=True)
class BackgroundModel:
    """Analytic ambient spacetime.

    kind        one of {"flat", "constant_curvature"}
    signature   tuple of +-1, length N
    kappa       sectional curvature (ignored for kind="flat")
    """

    kind: str = FLAT
    signature: tuple = (1.0, 1.0, 1.0)
    kappa: float = 0.0

    def __post_init__(self):
        if self.kind not in (FLAT, CONSTANT_CURVATURE):
            raise ValueError(f"unknown background kind {self.kind!r}")
        sig = tuple(float(s) for s in self.signature)
        if not sig or any(s not in (-1.0, 1.0) for s in sig):
            raise ValueError("signature entries must be +-1")
        object.__setattr__(self, "signature", sig)
        if self.kind == FLAT and self.kappa != 0.0:
            raise ValueError("flat background requires kappa = 0")

    @property
    def dim(self) -> int:
        return len(self.signature)

    @property
    def is_flat(self) -> bool:
        return self.kind == FLAT or self.kappa == 0.0

    @property
    def eta(self) -> np.ndarray:
        return np.diag(self.signature)

    # -- chart -------------------------------------------------------------

    def _conformal_denominator(self, x: np.ndarray) -> np.ndarray:
        sig = np.asarray(self.signature)
        s = np.einsum("...m,m,...m->...", x, sig, x)
        return 1.0 + 0.25 * self.kappa * s

    def in_domain(self, x: np.ndarray) -> np.ndarray:
        """Boolean mask of points inside the chart."""
        x = np.asarray(x, dtype=float)
        ok = np.all(np.isfinite(x), axis=-1)
        if not self.is_flat:
            ok = ok & (self._conformal_denominator(x) > _DOMAIN_EPS)
        return ok

    def require_in_domain(self, x: np.ndarray) -> None:
        ok = self.in_domain(np.asarray(x, dtype=float))
        if not np.all(ok):
            raise ChartDomainError(
                "point outside chart domain (conformal factor pole or non-finite coords)"
            )

    def conformal_factor(self, x: np.ndarray) -> np.ndarray:
        """Omega(x); identically 1 for flat models."""
        x = np.asarray(x, dtype=float)
        if self.is_flat:
            return np.ones(x.shape[:-1])
        return 1.0 / self._conformal_denominator(x)

    # -- tensors -----------------------------------------------------------

    def metric(self, x: np.ndarray) -> np.ndarray:
        """g_{mu nu}(x), shape (..., N, N)."""
        x = np.asarray(x, dtype=float)
        self.require_in_domain(x)
        eta = self.eta
        if self.is_flat:
            return np.broadcast_to(eta, x.shape[:-1] + eta.shape).copy()
        om = self.conformal_factor(x)
        return om[..., None, None] ** 2 * eta

    def inverse_metric(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        self.require_in_domain(x)
        eta = self.eta  # eta^{-1} = eta for +-1 signatures
        if self.is_flat:
            return np.broadcast_to(eta, x.shape[:-1] + eta.shape).copy()
        om = self.conformal_factor(x)
        return eta / om[..., None, None] ** 2

    def christoffel(self, x: np.ndarray) -> np.ndarray:
        """Gamma^mu_{nu rho}(x), shape (..., N, N, N), symmetric in (nu, rho).

        For g = Omega^2 eta the connection is
        Gamma^m_{n r} = d^m_n w_r + d^m_r w_n - eta_{n r} eta^{m s} w_s
        with w = grad log(Omega).
        """
        x = np.asarray(x, dtype=float)
        self.require_in_domain(x)
        n = self.dim
        if self.is_flat:
            return np.zeros(x.shape[:-1] + (n, n, n))
        sig = np.asarray(self.signature)
        denom = self._conformal_denominator(x)
        # w_m = -(kappa/2) * eta_{m a} x^a / denom
        w = -(0.5 * self.kappa) * (sig * x) / denom[..., None]
        eye = np.eye(n)
        return (
            np.einsum("mn,...r->...mnr", eye, w)
            + np.einsum("mr,...n->...mnr", eye, w)
            - np.einsum("nr,...m->...mnr", self.eta, sig * w)
        )

    def log_conformal_gradient(self, x: np.ndarray):
        """d_mu log Omega, or None for flat models."""
        if self.is_flat:
            return None
        x = np.asarray(x, dtype=float)
        sig = np.asarray(self.signature)
        denom = self._conformal_denominator(x)
        return -(0.5 * self.kappa) * (sig * x) / denom[..., None]

    def riemann(self, x: np.ndarray) -> np.ndarray:
        """All-lower R_{mu nu rho sigma}(x), shape (..., N, N, N, N)."""
        x = np.asarray(x, dtype=float)
        self.require_in_domain(x)
        n = self.dim
        if self.is_flat:
            return np.zeros(x.shape[:-1] + (n, n, n, n))
        g = self.metric(x)
        return self.kappa * (
            np.einsum("...mr,...ns->...mnrs", g, g)
            - np.einsum("...ms,...nr->...mnrs", g, g)
        )


# Spec-level free functions ------------------------------------------------


def metric_at(model: BackgroundModel, p) -> np.ndarray:
    return model.metric(np.asarray(p, dtype=float))


def christoffel_at(model: BackgroundModel, p) -> np.ndarray:
    return model.christoffel(np.asarray(p, dtype=float))


def riemann_at(model: BackgroundModel, p) -> np.ndarray:
    return model.riemann(np.asarray(p, dtype=float))
