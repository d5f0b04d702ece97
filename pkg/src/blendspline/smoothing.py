"""Noise removal by MLS projection of interior vertices and boundary curves."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .mesh import Neighborhood, SpatialIndex, TriMesh
from .linalg import weighted_lstsq
from .mls import MlsConfig, MlsError, default_bandwidth, project_point, theta

log = logging.getLogger(__name__)

__all__ = [
    "SmoothingError",
    "MlsLine",
    "CornerSpec",
    "smooth_surface",
    "fit_mls_line",
    "project_boundary_point",
    "boundary_pieces",
    "smooth_boundary",
]


class SmoothingError(RuntimeError):
    pass


@dataclass(frozen=True)
class MlsLine:
    q: np.ndarray
    u: np.ndarray
    objective: float = 0.0


@dataclass(frozen=True)
class CornerSpec:
    """Boundary vertices that must not move; they split a loop into pieces."""

    indices: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))

    def __len__(self):
        return len(self.indices)


def smooth_surface(mesh: TriMesh, cfg: MlsConfig, passes=1, max_failure_fraction=0.01) -> TriMesh:
    """Replace each interior vertex by its MLS projection.

    Boundary vertices and connectivity are left alone.  Vertices whose
    projection fails keep their position; the call fails only when more than
    ``max_failure_fraction`` of the vertices fail.
    """
    verts = mesh.vertices
    interior = np.flatnonzero(~mesh.boundary_vertices())
    for _ in range(passes):
        cfg_r = cfg.resolve(verts)
        index = SpatialIndex(verts)
        normals = mesh.with_vertices(verts).vertex_normals()
        out = verts.copy()
        failed = []
        for v in interior:
            try:
                out[v] = project_point(verts[v], index, cfg_r, normal_hint=normals[v])
            except MlsError:
                failed.append(int(v))
        if failed:
            log.warning("MLS projection failed for %d vertices", len(failed))
            if len(failed) > max_failure_fraction * mesh.n_vertices:
                raise SmoothingError(
                    f"{len(failed)} of {mesh.n_vertices} vertex projections failed: {failed[:20]}"
                )
        verts = out
    return mesh.with_vertices(verts)


def _line_objective(pts, q, u, h):
    d = pts - q
    perp = d - np.outer(d @ u, u)
    return float(np.sum(np.einsum("ij,ij->i", perp, perp) * theta(np.linalg.norm(d, axis=1), h)))


def _dominant_axis(pts, w):
    sw = w.sum()
    c = (w[:, None] * pts).sum(axis=0) / sw
    d = pts - c
    evals, evecs = np.linalg.eigh((w[:, None] * d).T @ d / sw)
    return c, evals, evecs[:, 2]


def fit_mls_line(r, nbrs: Neighborhood, cfg: MlsConfig, h=None) -> MlsLine:
    """Optimal weighted line near ``r``.

    Alternates between a line through the weighted centroid along the
    dominant axis of the weighted scatter and re-weighting at ``q``, the foot
    of ``r`` on that line.

    :raises MlsError: when the points do not define a direction
    """
    r = np.asarray(r, dtype=float)
    pts = nbrs.points
    if len(pts) < 2:
        raise MlsError("need at least 2 points for a line")
    if h is None:
        h = cfg.h if cfg.h is not None else default_bandwidth(nbrs)
    tol = cfg.tol

    w = theta(np.linalg.norm(pts - r, axis=1), h)
    if not w.sum() > 0:
        raise MlsError("all neighborhood weights vanish")
    c, evals, u = _dominant_axis(pts, w)
    if not evals[2] > 0 or np.ptp(pts, axis=0).max() == 0:
        raise MlsError("coincident points: no line direction")
    i = int(np.argmax(np.abs(u)))
    if u[i] < 0:
        u = -u
    q = c + ((r - c) @ u) * u
    initial = MlsLine(q, u, _line_objective(pts, q, u, h))
    obj = initial.objective
    for _ in range(cfg.max_iterations):
        w = theta(np.linalg.norm(pts - q, axis=1), h)
        if not w.sum() > 0:
            raise MlsError("all neighborhood weights vanish")
        c, _, u_full = _dominant_axis(pts, w)
        if u_full @ u < 0:
            u_full = -u_full
        q_full = c + ((r - c) @ u_full) * u_full
        # the plain alternation can 2-cycle on noisy boundaries; halve the step until the objective drops
        step = 1.0
        while True:
            u_new = u + step * (u_full - u)
            u_new /= np.linalg.norm(u_new)
            q_new = q + step * (q_full - q)
            q_new = q_new + ((r - q_new) @ u_new) * u_new
            obj_new = _line_objective(pts, q_new, u_new, h)
            if obj_new <= obj or step < 1e-6:
                break
            step *= 0.5
        done = np.linalg.norm(q_new - q) < tol and np.linalg.norm(u_new - u) < tol
        q, u, obj = q_new, u_new, obj_new
        if done:
            return MlsLine(q, u, obj) if obj <= initial.objective else initial
    raise MlsError(f"line search did not converge in {cfg.max_iterations} iterations")


def _quadratic(x):
    return np.column_stack([np.ones_like(x), x, x * x])


def project_boundary_point(r, nbrs: Neighborhood, cfg: MlsConfig, h=None):
    """Project ``r`` onto the local parametric quadratic curve ``(s, v(s), w(s))``.

    The frame has axes ``u``, ``r - q`` and their cross product, all
    orthonormalised; when ``r`` lies on the line any unit vector orthogonal
    to ``u`` is used instead.
    """
    r = np.asarray(r, dtype=float)
    if h is None:
        h = cfg.h if cfg.h is not None else default_bandwidth(nbrs)
    line = fit_mls_line(r, nbrs, cfg, h=h)
    q, u = line.q, line.u
    e2 = r - q
    e2 = e2 - (e2 @ u) * u
    nrm = np.linalg.norm(e2)
    if nrm <= 1e-12 * max(1.0, np.linalg.norm(r)):
        a = np.zeros(3)
        a[int(np.argmin(np.abs(u)))] = 1.0
        e2 = a - (a @ u) * u
        nrm = np.linalg.norm(e2)
    e2 = e2 / nrm
    e3 = np.cross(u, e2)

    d = nbrs.points - q
    s, y, z = d @ u, d @ e2, d @ e3
    w = theta(np.linalg.norm(d, axis=1), h)
    coef, _ = weighted_lstsq(_quadratic(s), np.column_stack([y, z]), w)
    return q + coef[0, 0] * e2 + coef[0, 1] * e3


def boundary_pieces(loop, corners: CornerSpec):
    """Split a closed loop at corner vertices.

    Returns ``(pieces, closed)``: without corners on this loop the whole
    loop is one closed piece; otherwise each piece runs from one corner to
    the next, both ends included.
    """
    loop = list(loop)
    pos = {v: i for i, v in enumerate(loop)}
    cpos = sorted(pos[c] for c in corners.indices if c in pos)
    if not cpos:
        return [loop], True
    pieces = []
    for a, b in zip(cpos, cpos[1:] + [cpos[0] + len(loop)]):
        pieces.append([loop[i % len(loop)] for i in range(a, b + 1)])
    return pieces, False


def _arc_neighbors(arc, j, k, period=None):
    """Indices into ``arc`` of the ``k`` entries nearest to ``j`` in arc length.

    ``period`` is the loop length for closed loops.
    """
    n = len(arc)
    k = min(k, n)
    d = np.abs(arc - arc[j])
    if period is not None:
        d = np.minimum(d, period - d)
    order = np.lexsort((np.arange(n), d))
    return order[:k]


def smooth_boundary(mesh: TriMesh, corners: CornerSpec | None, cfg: MlsConfig) -> TriMesh:
    """MLS curve smoothing of every boundary loop, piece by piece.

    Neighbourhoods are the ``cfg.k`` nearest vertices in arc length within
    the same piece; corner vertices stay fixed.
    """
    corners = corners or CornerSpec()
    verts = mesh.vertices
    cfg_r = cfg.resolve(verts)
    loops = mesh.boundary_loops
    on_loop = {v for loop in loops for v in loop}
    stray = [c for c in corners.indices if c not in on_loop]
    if stray:
        raise ValueError(f"corner vertices not on the boundary: {stray}")

    fixed = set(corners.indices)
    out = verts.copy()
    for loop in loops:
        pieces, closed = boundary_pieces(loop, corners)
        for piece in pieces:
            ring = piece + [piece[0]] if closed else piece
            arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(verts[ring], axis=0), axis=1))])
            period = arc[-1] if closed else None
            pts = verts[piece]
            arc_pts = arc[:len(piece)]
            n_pts = len(piece)
            if n_pts < 3:
                log.warning("boundary piece with %d vertices left unsmoothed", n_pts)
                continue
            for j, v in enumerate(piece):
                if v in fixed:
                    continue
                sel = _arc_neighbors(arc_pts, j, cfg_r.k, period)
                p = pts[sel]
                dist = np.linalg.norm(p - verts[v], axis=1)
                nb = Neighborhood(verts[v], np.asarray(piece)[sel], dist, p)
                try:
                    out[v] = project_boundary_point(verts[v], nb, cfg_r)
                except MlsError as exc:
                    log.warning("boundary vertex %d left unsmoothed: %s", v, exc)
    return mesh.with_vertices(out)
