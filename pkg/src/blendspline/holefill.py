"""Advancing-front hole filling driven by local MLS planes.

Each hole is closed by repeating four steps until three boundary vertices
remain: clip sharp ears, grow one candidate point per front edge along its
perpendicular bisector, lift candidates onto the MLS surface and attach each
one to its nearest front edge if the new triangle crosses no nearby front
edge.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .mesh import SpatialIndex, TriMesh
from .mls import MlsConfig, MlsError, fit_reference_plane, project_point, tangent_frame

log = logging.getLogger(__name__)

__all__ = [
    "HoleFillError",
    "FillParams",
    "FrontEdge",
    "FillEvent",
    "Candidate",
    "HoleFront",
    "classify_loops",
    "front_advance_distance",
    "segments_intersect",
    "hole_angle",
    "clip_ears",
    "grow_front",
    "attach_candidate",
    "fill_holes",
]


class HoleFillError(RuntimeError):
    """A hole could not be closed; ``residual_loop`` holds the remaining front."""

    def __init__(self, message, residual_loop=None, points=None):
        super().__init__(message)
        self.residual_loop = residual_loop
        self.points = points


@dataclass(frozen=True)
class FillParams:
    """Hole filling knobs.

    ``a=None`` uses the mean edge length of each hole's original boundary;
    ``max_front_iterations=None`` allows 50 outer iterations per original
    hole edge.  ``local_radius`` and ``min_spacing`` are multiples of ``a``;
    grown triangles with an angle below ``min_angle`` (radians) are rejected.
    """

    phi: float = 5 * np.pi / 9
    a: float | None = None
    max_front_iterations: int | None = None
    d_rule: str = "isosceles"
    local_radius: float = 3.0
    min_spacing: float = 0.5
    min_angle: float = np.radians(15.0)

    def __post_init__(self):
        if not 0 <= self.phi < np.pi:
            raise ValueError("phi must lie in [0, pi)")
        if self.a is not None and not self.a > 0:
            raise ValueError("a must be > 0")
        if self.max_front_iterations is not None and self.max_front_iterations < 1:
            raise ValueError("max_front_iterations must be >= 1")
        if self.d_rule not in ("isosceles", "equilateral"):
            raise ValueError("d_rule must be 'isosceles' or 'equilateral'")


@dataclass
class FrontEdge:
    """A front edge with the MLS reference plane fitted at its midpoint."""

    e1: int
    e2: int
    midpoint: np.ndarray
    q: np.ndarray
    n: np.ndarray


@dataclass
class FillEvent:
    """One triangle added while filling, with the front it was tested against."""

    kind: str  # "ear", "grow", "forced", "close"
    triangle: tuple[int, int, int]
    front: list[int]
    q: np.ndarray
    n: np.ndarray


def classify_loops(mesh_or_loops, vertices=None):
    """Split boundary loops into ``(outer, holes)``; the longest loop is outer."""
    if vertices is None:
        loops, vertices = mesh_or_loops.boundary_loops, mesh_or_loops.vertices
    else:
        loops = mesh_or_loops
    if not loops:
        raise ValueError("mesh has no boundary loops")
    lengths = [_loop_length(vertices, lp) for lp in loops]
    best = int(np.argmax(lengths))
    ties = [i for i, L in enumerate(lengths) if np.isclose(L, lengths[best], rtol=1e-12, atol=0)]
    if len(ties) > 1:
        log.warning("boundary loops %s have equal length; taking loop %d as outer", ties, ties[0])
        best = ties[0]
    return loops[best], [lp for i, lp in enumerate(loops) if i != best]


def _loop_length(vertices, loop):
    p = vertices[list(loop) + [loop[0]]]
    return float(np.linalg.norm(np.diff(p, axis=0), axis=1).sum())


def front_advance_distance(e, a, rule="isosceles"):
    """Distance from an edge midpoint to the new apex.

    ``isosceles``: legs of length ``a``, so ``sqrt(4 a^2 - e^2) / 2``; edges
    with ``e >= 2 a`` fall back to the equilateral height ``sqrt(3)/2 e``.
    """
    if rule == "equilateral":
        return np.sqrt(3.0) / 2.0 * e
    if e >= 2 * a:
        log.warning("front edge %.4g >= 2a (%.4g); using equilateral height", e, 2 * a)
        return np.sqrt(3.0) / 2.0 * e
    return np.sqrt(4.0 * a * a - e * e) / 2.0


def _orient2d(a, b, c):
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(a, b, p):
    return min(a[0], b[0]) <= p[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= p[1] <= max(a[1], b[1])


def segments_intersect(p1, p2, p3, p4) -> bool:
    """True if closed segments ``p1p2`` and ``p3p4`` share any point."""
    d1 = _orient2d(p3, p4, p1)
    d2 = _orient2d(p3, p4, p2)
    d3 = _orient2d(p1, p2, p3)
    d4 = _orient2d(p1, p2, p4)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and ((d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)):
        return True
    return ((d1 == 0 and _on_segment(p3, p4, p1)) or (d2 == 0 and _on_segment(p3, p4, p2))
            or (d3 == 0 and _on_segment(p1, p2, p3)) or (d4 == 0 and _on_segment(p1, p2, p4)))


def _point_in_triangle(p, a, b, c):
    d1, d2, d3 = _orient2d(a, b, p), _orient2d(b, c, p), _orient2d(c, a, p)
    return (d1 > 0 and d2 > 0 and d3 > 0) or (d1 < 0 and d2 < 0 and d3 < 0)


def _min_angle(p2):
    best = np.pi
    for i in range(3):
        u = p2[(i + 1) % 3] - p2[i]
        v = p2[(i + 2) % 3] - p2[i]
        cos = u @ v / (np.linalg.norm(u) * np.linalg.norm(v))
        best = min(best, float(np.arccos(np.clip(cos, -1.0, 1.0))))
    return best


def hole_angle(prev2, v2, next2) -> float:
    """Angle at ``v`` on the hole side (right of the directed front), in ``[0, 2 pi)``."""
    a = np.asarray(prev2) - v2
    b = np.asarray(next2) - v2
    ang = np.arctan2(a[0] * b[1] - a[1] * b[0], a @ b)
    return float(ang % (2 * np.pi))


class HoleFront:
    """Mutable state while closing one hole.

    Vertices and triangles are shared with the enclosing mesh build; the
    front ``loop`` is ordered with the existing surface on its left.
    """

    def __init__(self, verts, tris, loop, params: FillParams, cfg: MlsConfig, events=None):
        self.verts = verts
        self.tris = tris
        self.loop = list(loop)
        self.params = params
        self.cfg = cfg
        self.events = events
        self.owner = {}
        self.faces_of = {}
        for f, (a, b, c) in enumerate(tris):
            for u, v in ((a, b), (b, c), (c, a)):
                self.owner[(u, v)] = f
                self.faces_of.setdefault(u, []).append(f)
        self.a = params.a if params.a is not None else _loop_length(np.asarray(verts), loop) / len(loop)
        self.index = None
        self.rebuild_index()

    def rebuild_index(self):
        self.index = SpatialIndex(np.asarray(self.verts))

    def tri_normal(self, f):
        a, b, c = (self.verts[i] for i in self.tris[f])
        n = np.cross(b - a, c - a)
        return n / np.linalg.norm(n)

    def _ring_normal(self, v):
        acc = np.zeros(3)
        for f in self.faces_of.get(v, ()):
            a, b, c = (self.verts[i] for i in self.tris[f])
            acc += np.cross(b - a, c - a)
        return acc

    def edge_normal(self, u, v):
        """Orientation hint for front edge ``(u, v)``: area-weighted normal of
        both endpoint one-rings, so a single folded triangle cannot flip it."""
        if (u, v) not in self.owner:
            return None
        acc = self._ring_normal(u) + self._ring_normal(v)
        nrm = np.linalg.norm(acc)
        return self.tri_normal(self.owner[(u, v)]) if nrm == 0 else acc / nrm

    def local_plane(self, center, hint):
        """``(q, n)`` of the MLS reference plane at ``center``."""
        nbrs = self.cfg.neighborhood(self.index, center)
        plane = fit_reference_plane(center, nbrs, self.cfg, normal_hint=hint)
        return plane.q, plane.n

    def frame_2d(self, q, n):
        e1, e2 = tangent_frame(n)
        return lambda p: np.array([(p - q) @ e1, (p - q) @ e2])

    def local_edges(self, center, skip=()):
        """Front edges (as vertex pairs) with an endpoint within ``local_radius * a``."""
        r = self.params.local_radius * self.a
        loop = self.loop
        out = []
        for i in range(len(loop)):
            u, v = loop[i], loop[(i + 1) % len(loop)]
            if (u, v) in skip:
                continue
            if (np.linalg.norm(self.verts[u] - center) <= r or np.linalg.norm(self.verts[v] - center) <= r):
                out.append((u, v))
        return out

    def add_triangle(self, tri, kind, q, n):
        f = len(self.tris)
        self.tris.append(tuple(tri))
        a, b, c = tri
        for u, v in ((a, b), (b, c), (c, a)):
            self.owner[(u, v)] = f
            self.faces_of.setdefault(u, []).append(f)
        if self.events is not None:
            self.events.append(FillEvent(kind, tuple(tri), list(self.loop), q, n))

    def covers(self, p) -> bool:
        """True if ``p`` sits over a nearby triangle, i.e. the apex would fold
        the fill back onto the surface."""
        r = 2.0 * self.a
        near, _ = self.index.radius(p, r)
        faces = {f for v in near for f in self.faces_of.get(int(v), ())}
        for f in faces:
            a, b, c = (self.verts[i] for i in self.tris[f])
            n = np.cross(b - a, c - a)
            nn = n @ n
            if nn == 0:
                continue
            d = p - a
            if abs(d @ n) > self.a * np.sqrt(nn):
                continue
            # barycentric coordinates of the projection of p
            l1 = np.cross(d, c - a) @ n / nn
            l2 = np.cross(b - a, d) @ n / nn
            if l1 > 0 and l2 > 0 and l1 + l2 < 1:
                return True
        return False

    def has_edge(self, u, v):
        return (u, v) in self.owner or (v, u) in self.owner

    def triangle_is_clear(self, tri_ids, to2d, center):
        """Edges of the proposed triangle cross no local front edge and no
        front vertex lies strictly inside it (all in the local plane)."""
        pts = {v: to2d(self.verts[v]) for v in tri_ids}
        tri_edges = [(tri_ids[0], tri_ids[1]), (tri_ids[1], tri_ids[2]), (tri_ids[2], tri_ids[0])]
        for u, v in self.local_edges(center):
            pu, pv = to2d(self.verts[u]), to2d(self.verts[v])
            for a, b in tri_edges:
                if len({a, b} & {u, v}):
                    continue
                if segments_intersect(pts[a], pts[b], pu, pv):
                    return False
            if u not in pts and _point_in_triangle(pu, *(pts[t] for t in tri_ids)):
                return False
        return True

    def ear_candidates(self, phi):
        """``(angle, position)`` for every front vertex whose ear is valid and sharper than ``phi``."""
        loop = self.loop
        n = len(loop)
        out = []
        for i in range(n):
            prev, v, nxt = loop[i - 1], loop[i], loop[(i + 1) % n]
            hint = _mean_hint(self.edge_normal(prev, v), self.edge_normal(v, nxt))
            try:
                q, nrm = self.local_plane(self.verts[v], hint)
            except MlsError:
                continue
            to2d = self.frame_2d(q, nrm)
            ang = hole_angle(to2d(self.verts[prev]), to2d(self.verts[v]), to2d(self.verts[nxt]))
            if not 0 < ang < phi:
                continue
            out.append((ang, i, q, nrm))
        out.sort(key=lambda t: (t[0], t[1]))
        return out

    def try_ear(self, i, q, nrm, kind):
        loop = self.loop
        n = len(loop)
        prev, v, nxt = loop[i - 1], loop[i], loop[(i + 1) % n]
        if self.has_edge(prev, nxt):
            return False
        to2d = self.frame_2d(q, nrm)
        tri = (v, prev, nxt)
        p2 = [to2d(self.verts[t]) for t in tri]
        if _orient2d(*p2) <= 1e-12 * self.a * self.a:
            return False
        if not self.triangle_is_clear(tri, to2d, self.verts[v]):
            return False
        self.add_triangle(tri, kind, q, nrm)
        del loop[i]
        return True


def _mean_hint(*normals):
    ns = [n for n in normals if n is not None]
    if not ns:
        return None
    s = np.sum(ns, axis=0)
    nrm = np.linalg.norm(s)
    return s / nrm if nrm > 0 else ns[0]


def clip_ears(front: HoleFront, phi=None) -> int:
    """Clip every valid ear sharper than ``phi``, sharpest first, until none
    remains or the front is a triangle.  Returns the number clipped."""
    phi = front.params.phi if phi is None else phi
    clipped = 0
    while len(front.loop) > 3 and phi > 0:
        done = False
        for _, i, q, nrm in front.ear_candidates(phi):
            if front.try_ear(i, q, nrm, "ear"):
                clipped += 1
                done = True
                break
        if not done:
            break
    return clipped


@dataclass
class Candidate:
    point: np.ndarray
    edge: FrontEdge


def grow_front(front: HoleFront) -> list[Candidate]:
    """One candidate apex per front edge, lifted onto the MLS surface.

    Edges whose local MLS fit fails are skipped for this round.
    """
    loop = front.loop
    if len(loop) <= 3:
        raise ValueError("grow_front needs a front longer than 3 edges")
    out = []
    for i in range(len(loop)):
        e1, e2 = loop[i], loop[(i + 1) % len(loop)]
        p1, p2 = front.verts[e1], front.verts[e2]
        mid = 0.5 * (p1 + p2)
        try:
            q, n = front.local_plane(mid, front.edge_normal(e1, e2))
            to2d = front.frame_2d(q, n)
            a2, b2 = to2d(p1), to2d(p2)
            d = b2 - a2
            e = float(np.linalg.norm(d))
            if e == 0:
                continue
            right = np.array([d[1], -d[0]]) / e
            dist = front_advance_distance(e, front.a, front.params.d_rule)
            c2 = 0.5 * (a2 + b2) + dist * right
            t1, t2 = tangent_frame(n)
            seed = q + c2[0] * t1 + c2[1] * t2
            point = project_point(seed, front.index, front.cfg, normal_hint=n)
        except MlsError as exc:
            log.debug("skipping front edge (%d, %d): %s", e1, e2, exc)
            continue
        out.append(Candidate(point, FrontEdge(e1, e2, mid, q, n)))
    return out


def _point_segment_distance(p, a, b):
    ab = b - a
    denom = ab @ ab
    s = 0.0 if denom == 0 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + s * ab)))


def attach_candidate(front: HoleFront, cand: Candidate) -> bool:
    """Connect ``cand`` to its nearest front edge if the triangle is clear.

    Rejected when the apex is on the wrong side of the edge, closer than
    ``min_spacing * a`` to a front vertex, lies over an existing triangle,
    when the triangle has an angle
    below ``min_angle``, or when it crosses a local front edge.
    """
    loop = front.loop
    p = cand.point
    dists = [_point_segment_distance(p, front.verts[loop[i]], front.verts[loop[(i + 1) % len(loop)]])
             for i in range(len(loop))]
    i = int(np.argmin(dists))
    e1, e2 = loop[i], loop[(i + 1) % len(loop)]

    spacing = front.params.min_spacing * front.a
    for v in loop:
        if np.linalg.norm(front.verts[v] - p) < spacing:
            return False

    if front.covers(p):
        return False

    q, n = cand.edge.q, cand.edge.n
    to2d = front.frame_2d(q, n)
    pid = len(front.verts)
    front.verts.append(p)
    tri = (e2, e1, pid)
    p2 = [to2d(front.verts[t]) for t in tri]
    ok = (_orient2d(*p2) > 1e-12 * front.a * front.a
          and _min_angle(p2) >= front.params.min_angle
          and front.triangle_is_clear(tri, to2d, p))
    if not ok:
        front.verts.pop()
        return False
    front.add_triangle(tri, "grow", q, n)
    loop.insert(i + 1, pid)
    return True


def _close_triangle(front: HoleFront):
    a, b, c = front.loop
    tri = (a, c, b)
    hint = _mean_hint(*(front.edge_normal(u, v) for u, v in ((a, b), (b, c), (c, a))))
    front.add_triangle(tri, "close", front.verts[a], hint if hint is not None else np.zeros(3))
    front.loop = []


def _fill_one(front: HoleFront, cap: int):
    limit = 4 * len(front.loop) + 20
    for _ in range(cap):
        if len(front.loop) > limit:
            raise HoleFillError(f"front diverged: {len(front.loop)} vertices from a hole of {limit // 4 - 5}",
                                list(front.loop), np.asarray(front.verts)[front.loop])
        front.rebuild_index()
        clip_ears(front)
        if len(front.loop) <= 3:
            break
        accepted = 0
        for cand in grow_front(front):
            accepted += attach_candidate(front, cand)
            if len(front.loop) <= 3:
                break
        if accepted == 0:
            forced = False
            front.rebuild_index()
            for _, i, q, nrm in front.ear_candidates(np.pi):
                if front.try_ear(i, q, nrm, "forced"):
                    forced = True
                    break
            if not forced:
                raise HoleFillError("front is stuck: no candidate or ear can be added",
                                    list(front.loop), np.asarray(front.verts)[front.loop])
        if len(front.loop) <= 3:
            break
    else:
        raise HoleFillError(f"hole not closed after {cap} front iterations",
                            list(front.loop), np.asarray(front.verts)[front.loop])
    if len(front.loop) == 3:
        _close_triangle(front)


def fill_holes(mesh: TriMesh, params: FillParams | None = None, cfg: MlsConfig | None = None,
               events: list | None = None) -> TriMesh:
    """Close every boundary loop except the outer (longest) one.

    Existing vertices and triangles are kept unchanged; new ones are appended.
    If ``events`` is a list, one :class:`FillEvent` per added triangle is
    appended to it.

    :raises HoleFillError: if a hole cannot be closed within the iteration cap
    """
    params = params or FillParams()
    cfg = (cfg or MlsConfig()).resolve(mesh.vertices)
    if not mesh.boundary_loops:
        return mesh
    _, holes = classify_loops(mesh)
    if not holes:
        return mesh
    verts = [p.copy() for p in mesh.vertices]
    tris = [tuple(t) for t in mesh.triangles.tolist()]
    for hole in holes:
        front = HoleFront(verts, tris, hole, params, cfg, events)
        cap = params.max_front_iterations or 50 * len(hole)
        _fill_one(front, cap)
    return TriMesh(np.array(verts), np.array(tris, dtype=np.int64))
