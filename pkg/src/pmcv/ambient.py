"""The product space S^n(c) x R embedded in R^(n+2).

Points are arrays ``(x, t)`` with ``x`` on the round sphere of radius
``1/sqrt(c)`` centred at the origin of R^(n+1); the vertical unit vector
``xi`` is the last coordinate direction.  Every routine broadcasts over
leading batch axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

__all__ = [
    "AmbientSpace",
    "AmbientPoint",
    "OffManifoldError",
    "NotTangentError",
    "tangent_project",
    "ambient_covariant_derivative",
    "curvature_barR",
    "commutator_curvature",
]

ON_MANIFOLD_RTOL = 1e-12
TANGENCY_TOL = 1e-10


class OffManifoldError(ValueError):
    pass


class NotTangentError(ValueError):
    pass


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


@dataclass(frozen=True)
class AmbientSpace:
    """S^n(c) x R with ``c > 0`` and ``n >= 2``."""

    n: int
    c: float

    def __post_init__(self):
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 2):
            raise ValueError(f"sphere dimension must be an integer >= 2, got {self.n!r}")
        if not (math.isfinite(self.c) and self.c > 0):
            # c <= 0 has no proper-biharmonic pmc submanifolds and needs
            # a different model of the space form
            raise ValueError(f"curvature must be positive, got {self.c!r}")

    @property
    def radius(self) -> float:
        return 1.0 / math.sqrt(self.c)

    @property
    def dim(self) -> int:
        """Dimension ``n + 2`` of the Euclidean space holding the model."""
        return self.n + 2

    @property
    def xi(self) -> np.ndarray:
        e = np.zeros(self.n + 2)
        e[-1] = 1.0
        return e

    def point(self, x, t=0.0) -> np.ndarray:
        p = np.concatenate([np.asarray(x, dtype=float), [float(t)]])
        self.check_point(p)
        return p

    def check_point(self, p) -> None:
        p = np.asarray(p, dtype=float)
        if p.shape[-1] != self.n + 2:
            raise OffManifoldError(f"expected points in R^{self.n + 2}, got shape {p.shape}")
        r2 = 1.0 / self.c
        err = np.abs(_dot(p[..., :-1], p[..., :-1]) - r2)
        if np.any(err > ON_MANIFOLD_RTOL * r2):
            raise OffManifoldError(
                f"point off S^{self.n}({self.c}) x R: | |x|^2 - 1/c | = {np.max(err):.3e}"
            )

    def tangent_projector(self, p) -> np.ndarray:
        """Orthogonal projector of R^(n+2) onto the tangent space at ``p``."""
        p = np.asarray(p, dtype=float)
        x = p[..., :-1]
        P = np.broadcast_to(np.eye(self.n + 2), p.shape[:-1] + (self.n + 2,) * 2).copy()
        P[..., :-1, :-1] -= x[..., :, None] * x[..., None, :] / _dot(x, x)[..., None, None]
        return P

    def is_tangent(self, p, v, tol: float = TANGENCY_TOL) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        x = p[..., :-1]
        radial = np.abs(_dot(v[..., :-1], x)) * math.sqrt(self.c)
        scale = np.maximum(np.linalg.norm(v, axis=-1), 1.0)
        return radial <= tol * scale


class AmbientPoint(NamedTuple):
    x: np.ndarray
    t: float

    def as_array(self) -> np.ndarray:
        return np.concatenate([np.asarray(self.x, dtype=float), [float(self.t)]])


def _as_array(p) -> np.ndarray:
    if isinstance(p, AmbientPoint):
        return p.as_array()
    return np.asarray(p, dtype=float)


def tangent_project(space: AmbientSpace, p, v, check: bool = True) -> np.ndarray:
    """Remove the sphere-radial component of ``v`` at ``p``; ``t`` is untouched."""
    p = _as_array(p)
    if check:
        space.check_point(p)
    v = np.array(v, dtype=float)
    x = p[..., :-1]
    coef = _dot(v[..., :-1], x) / _dot(x, x)
    v[..., :-1] -= coef[..., None] * x
    return v


def ambient_covariant_derivative(space: AmbientSpace, p, direction, field_derivative) -> np.ndarray:
    """Levi-Civita derivative of a tangent field.

    ``field_derivative`` is the Euclidean derivative of the field in the given
    direction; for a submanifold of Euclidean space the ambient connection is
    its tangential part.
    """
    p = _as_array(p)
    space.check_point(p)
    if not np.all(space.is_tangent(p, direction)):
        raise NotTangentError("direction is not tangent to S^n(c) x R")
    return tangent_project(space, p, field_derivative, check=False)


def curvature_barR(space: AmbientSpace, p, X, Y, Z, check: bool = True) -> np.ndarray:
    """Riemann curvature ``R(X, Y)Z`` of S^n(c) x R."""
    p = _as_array(p)
    X, Y, Z = (np.asarray(a, dtype=float) for a in (X, Y, Z))
    if check:
        space.check_point(p)
        for name, v in (("X", X), ("Y", Y), ("Z", Z)):
            if not np.all(space.is_tangent(p, v)):
                raise NotTangentError(f"{name} is not tangent to S^n(c) x R")
    xi = space.xi
    yz, xz = _dot(Y, Z), _dot(X, Z)
    yxi, xxi, zxi = Y[..., -1], X[..., -1], Z[..., -1]
    out = (
        (yz - yxi * zxi)[..., None] * X
        + (xxi * zxi - xz)[..., None] * Y
        + (xz * yxi - yz * xxi)[..., None] * xi
    )
    return space.c * out


# ---------------------------------------------------------------------------
# Curvature from the connection, for cross-checking the closed form.
# ---------------------------------------------------------------------------


def _local_chart(space: AmbientSpace, p: np.ndarray):
    """Coordinates y in R^(n+1) around p: radial projection of a tangent plane."""
    x0 = p[:-1]
    n1 = space.n + 1
    # orthonormal basis of the tangent space of the sphere factor at x0
    basis = np.linalg.svd(np.eye(n1) - np.outer(x0, x0) / (x0 @ x0))[0][:, : space.n]
    r = space.radius

    def phi(y):
        w = x0 + y[..., : space.n] @ basis.T
        x = r * w / np.linalg.norm(w, axis=-1, keepdims=True)
        return np.concatenate([x, p[-1] + y[..., space.n :]], axis=-1)

    def dphi(y):
        # columns are the coordinate vector fields d phi / d y_k
        w = x0 + y[..., : space.n] @ basis.T
        nw = np.linalg.norm(w, axis=-1)[..., None]
        what = w / nw
        dx = r * (basis - what[..., :, None] * (what @ basis)[..., None, :]) / nw[..., None]
        J = np.zeros(y.shape[:-1] + (space.n + 2, n1))
        J[..., :-1, : space.n] = dx
        J[..., -1, space.n] = 1.0
        return J

    return phi, dphi


def commutator_curvature(
    space: AmbientSpace,
    p,
    i: int,
    j: int,
    z_coeffs: Callable[[np.ndarray], np.ndarray],
    h: float = 1e-4,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """``R(d_i, d_j)Z = D_i D_j Z - D_j D_i Z`` by nested central differences.

    Coordinate fields ``d_i, d_j`` of a local chart commute, so no bracket
    term appears.  ``Z = sum_k z_k(y) d_k`` with coefficients supplied by
    ``z_coeffs``.  Returns ``(R, X, Y, Z)`` at ``p``.
    """
    p = _as_array(p)
    space.check_point(p)
    phi, dphi = _local_chart(space, p)
    dim = space.n + 1

    def Zfield(y):
        return np.einsum("...ak,...k->...a", dphi(y), z_coeffs(y))

    def nabla(field, k):
        def out(y):
            e = np.zeros(dim)
            e[k] = h
            d = (field(y + e) - field(y - e)) / (2 * h)
            return tangent_project(space, phi(y), d, check=False)

        return out

    y0 = np.zeros(dim)
    R = nabla(nabla(Zfield, j), i)(y0) - nabla(nabla(Zfield, i), j)(y0)
    J = dphi(y0)
    return R, J[:, i], J[:, j], Zfield(y0)
