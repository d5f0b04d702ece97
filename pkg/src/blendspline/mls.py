"""Moving least squares projection onto the surface implied by a point set.

Projecting a point ``r`` is a two step process: find the reference plane
``(n, t)`` minimising

    sum_i <n, p_i - r - t n>^2 theta(|p_i - r - t n|)

and then fit a weighted bi-quadratic height field ``g`` over that plane.
The projection is ``q + g(0, 0) n`` with ``q = r + t n``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .linalg import weighted_lstsq
from .mesh import Neighborhood, SpatialIndex, query_neighborhood

__all__ = [
    "MlsError",
    "MlsConfig",
    "ReferencePlane",
    "LocalQuadratic",
    "theta",
    "tangent_frame",
    "default_bandwidth",
    "plane_objective",
    "fit_reference_plane",
    "fit_local_biquadratic",
    "project_point",
]


class MlsError(RuntimeError):
    """Degenerate neighborhood or failed nonlinear search."""


@dataclass(frozen=True)
class MlsConfig:
    """Parameters shared by every MLS fit.

    ``h`` is the bandwidth in ``theta(x) = exp(-x**2 / h)``; ``None`` means
    the squared mean distance from the query point to its ``k`` neighbours.
    ``convergence_tol`` of ``None`` is resolved to ``1e-7`` times the
    bounding-box diagonal by :meth:`resolve`.
    """

    h: float | None = None
    k: int = 15
    radius: float | None = None
    max_iterations: int = 100
    convergence_tol: float | None = None

    def __post_init__(self):
        if self.h is not None and not self.h > 0:
            raise ValueError("h must be > 0")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.radius is not None and not self.radius > 0:
            raise ValueError("radius must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.convergence_tol is not None and not self.convergence_tol > 0:
            raise ValueError("convergence_tol must be > 0")

    def resolve(self, points) -> "MlsConfig":
        if self.convergence_tol is not None:
            return self
        pts = np.asarray(points, dtype=float)
        diag = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0))) if len(pts) else 1.0
        return replace(self, convergence_tol=1e-7 * (diag if diag > 0 else 1.0))

    @property
    def tol(self) -> float:
        return self.convergence_tol if self.convergence_tol is not None else 1e-7

    def neighborhood(self, index: SpatialIndex, center) -> Neighborhood:
        if self.radius is not None:
            return query_neighborhood(index, center, radius=self.radius)
        return query_neighborhood(index, center, k=self.k)


@dataclass(frozen=True)
class ReferencePlane:
    """Plane through ``q = origin + t * n`` with unit normal ``n``."""

    n: np.ndarray
    t: float
    origin: np.ndarray
    objective: float = 0.0
    iterations: int = 0

    @property
    def q(self) -> np.ndarray:
        return self.origin + self.t * self.n


@dataclass(frozen=True)
class LocalQuadratic:
    """``g(x, y) = c0 + c1 x + c2 y + c3 x^2 + c4 x y + c5 y^2`` in the frame
    ``(q; e1, e2, n)``."""

    coeffs: np.ndarray
    q: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    n: np.ndarray
    ridge: bool = False

    def __call__(self, x, y):
        c = self.coeffs
        return c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y

    def to_local(self, points):
        d = np.asarray(points, dtype=float) - self.q
        return d @ self.e1, d @ self.e2, d @ self.n

    def lift(self, x, y):
        """3D point on the quadratic above local coordinates ``(x, y)``."""
        return self.q + x * self.e1 + y * self.e2 + self(x, y) * self.n


def theta(x, h):
    """Gaussian weight ``exp(-x**2 / h)``."""
    x = np.asarray(x, dtype=float)
    return np.exp(-(x * x) / h)


def tangent_frame(n):
    """Deterministic orthonormal tangents ``(e1, e2)`` with ``e1 x e2 = n``."""
    n = np.asarray(n, dtype=float)
    a = np.zeros(3)
    a[int(np.argmin(np.abs(n)))] = 1.0
    e1 = a - (a @ n) * n
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    return e1, e2


def default_bandwidth(nbrs: Neighborhood) -> float:
    d = float(np.mean(nbrs.distances)) if len(nbrs) else 0.0
    return d * d if d > 0 else 1.0


def plane_objective(points, r, n, t, h) -> float:
    d = np.asarray(points) - (np.asarray(r) + t * np.asarray(n))
    return float(np.sum((d @ n) ** 2 * theta(np.linalg.norm(d, axis=1), h)))


def _weighted_pca(points, w):
    sw = w.sum()
    c = (w[:, None] * points).sum(axis=0) / sw
    d = points - c
    cov = (w[:, None] * d).T @ d / sw
    evals, evecs = np.linalg.eigh(cov)
    return c, evals, evecs


def _orient(n, ref):
    if ref is not None and n @ ref < 0:
        return -n
    if ref is None:
        i = int(np.argmax(np.abs(n)))
        if n[i] < 0:
            return -n
    return n


def fit_reference_plane(r, nbrs: Neighborhood, cfg: MlsConfig, h=None, normal_hint=None) -> ReferencePlane:
    """Optimal local reference plane for the query point ``r``.

    Alternating minimisation: weights are frozen at the current foot point
    ``q``, the frozen-weight problem is solved exactly by weighted PCA
    (normal = least principal axis, plane through the weighted centroid),
    and ``q`` moves to the foot of ``r`` on the new plane.  If the fixed
    point scores worse than the initial principal-axis guess, the guess is
    returned instead.

    :param normal_hint: orientation reference; the returned normal has a
        nonnegative dot product with it
    :raises MlsError: fewer than 3 points, collinear points, or no
        convergence within ``cfg.max_iterations``
    """
    r = np.asarray(r, dtype=float)
    pts = nbrs.points
    if len(pts) < 3:
        raise MlsError(f"need at least 3 points for a plane, got {len(pts)}")
    if h is None:
        h = cfg.h if cfg.h is not None else default_bandwidth(nbrs)
    hint = None if normal_hint is None else np.asarray(normal_hint, dtype=float)
    if hint is not None and not np.linalg.norm(hint) > 0:
        hint = None
    tol = cfg.tol

    w = theta(np.linalg.norm(pts - r, axis=1), h)
    if not w.sum() > 0:
        raise MlsError("all neighborhood weights vanish")
    c, evals, evecs = _weighted_pca(pts, w)
    scale = max(evals[2], np.finfo(float).tiny)
    if evals[1] <= 1e-12 * scale:
        raise MlsError("collinear or coincident neighborhood: no unique plane")
    n = _orient(evecs[:, 0], hint)
    t = float(n @ (c - r))

    initial = (plane_objective(pts, r, n, t, h), n, t)
    obj = initial[0]
    for it in range(1, cfg.max_iterations + 1):
        q = r + t * n
        w = theta(np.linalg.norm(pts - q, axis=1), h)
        if not w.sum() > 0:
            raise MlsError("all neighborhood weights vanish")
        c, evals, evecs = _weighted_pca(pts, w)
        n_new = _orient(evecs[:, 0], n if hint is None else hint)
        t_new = float(n_new @ (c - r))
        obj_new = plane_objective(pts, r, n_new, t_new, h)
        done = (abs(obj - obj_new) < tol * tol and abs(t_new - t) < tol
                and np.linalg.norm(n_new - n) < tol)
        n, t, obj = n_new, t_new, obj_new
        if done:
            if obj > initial[0]:
                return ReferencePlane(initial[1], initial[2], r, initial[0], it)
            return ReferencePlane(n, t, r, obj, it)
    raise MlsError(f"reference plane search did not converge in {cfg.max_iterations} iterations")


def _quad_design(x, y):
    return np.column_stack([np.ones_like(x), x, y, x * x, x * y, y * y])


def fit_local_biquadratic(plane: ReferencePlane, nbrs: Neighborhood, cfg: MlsConfig, h=None) -> LocalQuadratic:
    """Weighted bi-quadratic height field over the reference plane.

    Weights are ``theta(|p_i - q|)``.  Rank deficient systems (fewer than six
    usable points, degenerate layouts) are solved with a small ridge and
    flagged via ``LocalQuadratic.ridge``.
    """
    if h is None:
        h = cfg.h if cfg.h is not None else default_bandwidth(nbrs)
    q = plane.q
    n = plane.n
    e1, e2 = tangent_frame(n)
    d = nbrs.points - q
    x, y, f = d @ e1, d @ e2, d @ n
    w = theta(np.linalg.norm(d, axis=1), h)
    coeffs, ridge = weighted_lstsq(_quad_design(x, y), f, w)
    return LocalQuadratic(coeffs, q, e1, e2, n, ridge)


def project_point(r, index: SpatialIndex, cfg: MlsConfig, normal_hint=None, nbrs=None,
                  return_quadratic=False):
    """MLS projection of ``r`` onto the surface sampled by ``index``.

    The result is ``q + g(0, 0) n``.  With ``return_quadratic`` the fitted
    :class:`LocalQuadratic` is returned as well.
    """
    r = np.asarray(r, dtype=float)
    if nbrs is None:
        nbrs = cfg.neighborhood(index, r)
    h = cfg.h if cfg.h is not None else default_bandwidth(nbrs)
    plane = fit_reference_plane(r, nbrs, cfg, h=h, normal_hint=normal_hint)
    quad = fit_local_biquadratic(plane, nbrs, cfg, h=h)
    point = quad.q + quad.coeffs[0] * quad.n
    return (point, quad) if return_quadratic else point
