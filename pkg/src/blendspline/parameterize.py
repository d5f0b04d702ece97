"""Mean value coordinate parameterization onto the unit square."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.sparse.linalg import spsolve

from .mesh import TriMesh

__all__ = [
    "ParameterizationError",
    "Parameterization",
    "ConvexWeights",
    "mean_value_weights",
    "auto_corners",
    "pin_boundary",
    "solve_parameterization",
    "parameterize",
]

_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


class ParameterizationError(ValueError):
    pass


@dataclass
class ConvexWeights:
    vertex: int
    neighbors: np.ndarray
    weights: np.ndarray


@dataclass
class Parameterization:
    """Per-vertex ``uv`` in the unit square.

    ``pinned`` maps boundary vertex index to its fixed ``uv``;
    ``corner_indices`` are the vertices sent to ``(0,0), (1,0), (1,1), (0,1)``.
    """

    uv: np.ndarray
    pinned: dict
    corner_indices: tuple
    residual: float = 0.0


def mean_value_weights(mesh: TriMesh, v: int) -> ConvexWeights:
    """Normalised mean value weights of interior vertex ``v``.

    ``w_vj`` is proportional to ``(tan(a/2) + tan(b/2)) / |p_v - p_j|`` with
    ``a`` and ``b`` the angles at ``v`` in the two triangles sharing edge
    ``(v, j)``.

    :raises ParameterizationError: on a degenerate fan
    """
    p = mesh.vertices
    acc: dict[int, float] = {}
    pv = p[v]
    for f in mesh.vertex_faces()[v]:
        tri = mesh.triangles[f]
        k = int(np.flatnonzero(tri == v)[0])
        j, l = int(tri[(k + 1) % 3]), int(tri[(k + 2) % 3])
        dj, dl = p[j] - pv, p[l] - pv
        lj, ll = np.linalg.norm(dj), np.linalg.norm(dl)
        if lj == 0 or ll == 0:
            raise ParameterizationError(f"zero-length edge at vertex {v}")
        cross = np.linalg.norm(np.cross(dj, dl))
        if cross == 0:
            raise ParameterizationError(f"zero-area triangle {f} at vertex {v}")
        ang = np.arctan2(cross, dj @ dl)
        t = np.tan(ang / 2)
        acc[j] = acc.get(j, 0.0) + t / lj
        acc[l] = acc.get(l, 0.0) + t / ll
    if not acc:
        raise ParameterizationError(f"vertex {v} has no incident triangles")
    nb = np.array(sorted(acc), dtype=np.int64)
    w = np.array([acc[j] for j in nb])
    return ConvexWeights(v, nb, w / w.sum())


def _chord(points):
    """Edge lengths of the closed polygon ``points``."""
    return np.linalg.norm(np.diff(points, axis=0, append=points[:1]), axis=1)


def auto_corners(loop, vertices):
    """Loop vertices nearest to chord-length fractions 0, 1/4, 1/2, 3/4 (from ``loop[0]``)."""
    pts = vertices[list(loop)]
    seg = _chord(pts)
    cum = np.concatenate([[0.0], np.cumsum(seg)[:-1]]) / seg.sum()
    corners = []
    for frac in (0.0, 0.25, 0.5, 0.75):
        i = int(np.argmin(np.abs(cum - frac)))
        while loop[i] in corners:
            i = (i + 1) % len(loop)
        corners.append(loop[i])
    return corners


def pin_boundary(loop, vertices, corners=None) -> dict:
    """Map a boundary loop onto the unit square by chord length.

    :param corners: four vertex indices of ``loop`` in loop order, sent to
        ``(0,0), (1,0), (1,1), (0,1)``; chosen automatically if omitted
    :returns: ``{vertex: (u, v)}``
    :raises ParameterizationError: wrong corner count or order
    """
    loop = list(loop)
    if len(loop) < 4:
        raise ParameterizationError("boundary loop needs at least 4 vertices")
    if corners is None:
        corners = auto_corners(loop, vertices)
    corners = [int(c) for c in corners]
    if len(corners) != 4:
        raise ParameterizationError(f"need exactly 4 corners, got {len(corners)}")
    pos = {v: i for i, v in enumerate(loop)}
    missing = [c for c in corners if c not in pos]
    if missing:
        raise ParameterizationError(f"corners not on the boundary loop: {missing}")
    start = pos[corners[0]]
    rot = loop[start:] + loop[:start]
    rpos = [rot.index(c) for c in corners]
    if rpos != sorted(rpos) or len(set(rpos)) != 4:
        raise ParameterizationError("corners must be distinct and follow the loop order")

    out = {}
    bounds = rpos + [len(rot)]
    for side in range(4):
        idx = [rot[i % len(rot)] for i in range(bounds[side], bounds[side + 1] + 1)]
        pts = vertices[idx]
        cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
        s = cum / cum[-1]
        a, b = _SQUARE[side], _SQUARE[(side + 1) % 4]
        for v, t in zip(idx[:-1], s[:-1]):
            out[v] = tuple((1.0 - t) * a + t * b)
    for c, xy in zip(corners, _SQUARE):
        out[c] = tuple(xy)
    return out


def solve_parameterization(mesh: TriMesh, pinned: dict, corners=()) -> Parameterization:
    """Solve for interior ``uv`` as mean-value convex combinations of neighbours.

    :raises ParameterizationError: disconnected mesh, more than one boundary
        loop, unpinned boundary vertices or flipped parametric triangles
    """
    n = mesh.n_vertices
    loops = mesh.boundary_loops
    if len(loops) != 1:
        raise ParameterizationError(f"expected one boundary loop (fill holes first), found {len(loops)}")
    adj = sparse.coo_matrix((np.ones(3 * mesh.n_triangles), tuple(mesh.half_edges().T)), shape=(n, n))
    n_comp, _ = csgraph.connected_components(adj, directed=False)
    if n_comp != 1:
        raise ParameterizationError(f"mesh has {n_comp} connected components")
    unpinned = [v for v in loops[0] if v not in pinned]
    if unpinned:
        raise ParameterizationError(f"boundary vertices without pinned uv: {unpinned[:10]}")

    is_fixed = np.zeros(n, dtype=bool)
    uv = np.zeros((n, 2))
    for v, xy in pinned.items():
        is_fixed[v] = True
        uv[v] = xy
    free = np.flatnonzero(~is_fixed)
    col = -np.ones(n, dtype=np.int64)
    col[free] = np.arange(len(free))

    rows, cols, vals = [], [], []
    rhs = np.zeros((len(free), 2))
    rows_w = {}
    for r, v in enumerate(free):
        cw = mean_value_weights(mesh, int(v))
        rows_w[int(v)] = cw
        rows.append(r)
        cols.append(r)
        vals.append(1.0)
        for j, w in zip(cw.neighbors, cw.weights):
            if is_fixed[j]:
                rhs[r] += w * uv[j]
            else:
                rows.append(r)
                cols.append(col[j])
                vals.append(-w)
    if len(free):
        A = sparse.csc_matrix((vals, (rows, cols)), shape=(len(free), len(free)))
        sol = spsolve(A, rhs)
        uv[free] = np.asarray(sol).reshape(-1, 2)

    residual = 0.0
    for v, cw in rows_w.items():
        residual = max(residual, float(np.abs(uv[v] - cw.weights @ uv[cw.neighbors]).max()))

    t = mesh.triangles
    a, b, c = uv[t[:, 0]], uv[t[:, 1]], uv[t[:, 2]]
    signed = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    flipped = np.flatnonzero(signed <= 0)
    if len(flipped):
        raise ParameterizationError(f"{len(flipped)} flipped parametric triangles: {flipped[:20].tolist()}")
    return Parameterization(uv, dict(pinned), tuple(corners), residual)


def parameterize(mesh: TriMesh, corners=None) -> Parameterization:
    """Pin the single boundary loop to the unit square and solve for the interior."""
    loops = mesh.boundary_loops
    if len(loops) != 1:
        raise ParameterizationError(f"expected one boundary loop (fill holes first), found {len(loops)}")
    loop = loops[0]
    if corners is None:
        corners = auto_corners(loop, mesh.vertices)
    pinned = pin_boundary(loop, mesh.vertices, corners)
    return solve_parameterization(mesh, pinned, corners)
