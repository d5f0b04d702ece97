"""Triangle mesh container, OBJ/PLY I/O, boundary loops and neighborhood queries."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

log = logging.getLogger(__name__)

__all__ = [
    "MeshError",
    "TriMesh",
    "Neighborhood",
    "SpatialIndex",
    "load_mesh",
    "save_obj",
    "save_ply",
    "extract_boundary_loops",
    "query_neighborhood",
]

# relative to the squared bounding-box diagonal
_DEGENERATE_AREA = 1e-14


class MeshError(ValueError):
    """Raised for malformed, non-manifold or otherwise invalid meshes."""


class TriMesh:
    """Indexed, consistently oriented, manifold-with-boundary triangle mesh.

    The mesh is treated as immutable; every processing stage returns a new
    instance.  Boundary loops are computed on first access.

    :param vertices: ``(n, 3)`` vertex positions
    :param triangles: ``(m, 3)`` vertex indices
    """

    def __init__(self, vertices, triangles, validate=True):
        self.vertices = np.array(vertices, dtype=float).reshape(-1, 3)
        self.triangles = np.array(triangles, dtype=np.int64).reshape(-1, 3)
        self.vertices.setflags(write=False)
        self.triangles.setflags(write=False)
        self._loops = None
        self._vertex_faces = None
        self._neighbors = None
        if validate:
            self._validate()

    def __repr__(self):
        return f"TriMesh({self.n_vertices} vertices, {self.n_triangles} triangles)"

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def _validate(self):
        t = self.triangles
        n = self.n_vertices
        if len(t) == 0:
            return
        if t.min() < 0 or t.max() >= n:
            raise MeshError(f"triangle index out of range [0, {n})")
        distinct = (t[:, 0] != t[:, 1]) & (t[:, 1] != t[:, 2]) & (t[:, 0] != t[:, 2])
        if not distinct.all():
            raise MeshError(f"triangles with repeated vertices: {np.flatnonzero(~distinct).tolist()}")

        areas = self.triangle_areas()
        scale = max(self.bbox_diagonal() ** 2, np.finfo(float).tiny)
        bad = np.flatnonzero(areas <= _DEGENERATE_AREA * scale)
        if len(bad):
            raise MeshError(f"degenerate (zero-area) triangles: {bad.tolist()}")

        half = self.half_edges()
        und = np.sort(half, axis=1)
        _, counts = np.unique(und, axis=0, return_counts=True)
        if (counts > 2).any():
            raise MeshError("non-manifold edge: an edge is shared by more than two triangles")
        _, dcounts = np.unique(half, axis=0, return_counts=True)
        if (dcounts > 1).any():
            raise MeshError("inconsistent triangle orientation")

    def half_edges(self) -> np.ndarray:
        """Directed edges ``(a, b)`` in triangle order, shape ``(3m, 2)``."""
        t = self.triangles
        return np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])

    def triangle_normals(self, normalize=True) -> np.ndarray:
        p = self.vertices[self.triangles]
        nrm = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        if normalize:
            nrm = nrm / np.linalg.norm(nrm, axis=1, keepdims=True)
        return nrm

    def triangle_areas(self) -> np.ndarray:
        if self.n_triangles == 0:
            return np.zeros(0)
        return 0.5 * np.linalg.norm(self.triangle_normals(normalize=False), axis=1)

    def vertex_normals(self) -> np.ndarray:
        """Area-weighted average of incident triangle normals (zero for isolated vertices)."""
        acc = np.zeros_like(self.vertices)
        fn = self.triangle_normals(normalize=False)
        for k in range(3):
            np.add.at(acc, self.triangles[:, k], fn)
        nrm = np.linalg.norm(acc, axis=1, keepdims=True)
        return np.divide(acc, nrm, out=np.zeros_like(acc), where=nrm > 0)

    def bbox_diagonal(self) -> float:
        if self.n_vertices == 0:
            return 0.0
        return float(np.linalg.norm(self.vertices.max(axis=0) - self.vertices.min(axis=0)))

    def vertex_faces(self) -> list[list[int]]:
        """Incident triangle indices per vertex."""
        if self._vertex_faces is None:
            vf = [[] for _ in range(self.n_vertices)]
            for f, tri in enumerate(self.triangles.tolist()):
                for v in tri:
                    vf[v].append(f)
            self._vertex_faces = vf
        return self._vertex_faces

    def vertex_neighbors(self) -> list[list[int]]:
        """Sorted one-ring vertex indices per vertex."""
        if self._neighbors is None:
            nb = [set() for _ in range(self.n_vertices)]
            for a, b in self.half_edges().tolist():
                nb[a].add(b)
                nb[b].add(a)
            self._neighbors = [sorted(s) for s in nb]
        return self._neighbors

    @property
    def boundary_loops(self) -> list[list[int]]:
        if self._loops is None:
            self._loops = extract_boundary_loops(self)
        return self._loops

    def boundary_vertices(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        for loop in self.boundary_loops:
            mask[loop] = True
        return mask

    def n_boundary_edges(self) -> int:
        und = np.sort(self.half_edges(), axis=1)
        _, counts = np.unique(und, axis=0, return_counts=True)
        return int((counts == 1).sum())

    def with_vertices(self, vertices) -> "TriMesh":
        """Same connectivity, new positions (no revalidation of topology)."""
        out = TriMesh(vertices, self.triangles, validate=False)
        out._loops = self._loops
        out._vertex_faces = self._vertex_faces
        out._neighbors = self._neighbors
        return out


def extract_boundary_loops(mesh: TriMesh) -> list[list[int]]:
    """Ordered boundary cycles with the mesh interior on the left.

    A directed edge ``a -> b`` of some triangle is a boundary edge when no
    triangle contains ``b -> a``.  Loops are emitted in order of their
    smallest starting vertex, each starting at its smallest vertex index, so
    the result is deterministic.
    """
    half = mesh.half_edges().tolist()
    directed = set(map(tuple, half))
    outgoing: dict[int, list[int]] = {}
    n_edges = 0
    for a, b in half:
        if (b, a) not in directed:
            outgoing.setdefault(a, []).append(b)
            n_edges += 1
    for v in outgoing:
        outgoing[v].sort()

    loops = []
    used = 0
    for start in sorted(outgoing):
        while outgoing.get(start):
            loop = [start]
            cur = outgoing[start].pop(0)
            used += 1
            while cur != start:
                if not outgoing.get(cur):
                    raise MeshError(f"open boundary chain at vertex {cur}")
                loop.append(cur)
                nxt = outgoing[cur].pop(0)
                used += 1
                cur = nxt
                if len(loop) > n_edges:
                    raise MeshError("boundary chain does not close")
            loops.append(loop)
    if used != n_edges:
        raise MeshError("boundary edges not covered by closed loops")
    return loops


def _orient_consistently(triangles: np.ndarray) -> np.ndarray:
    """Flip triangles so neighbours agree on orientation (BFS per component)."""
    tris = triangles.copy()
    m = len(tris)
    edge_faces: dict[tuple[int, int], list[int]] = {}
    for f, (a, b, c) in enumerate(tris.tolist()):
        for u, v in ((a, b), (b, c), (c, a)):
            edge_faces.setdefault((min(u, v), max(u, v)), []).append(f)
    if any(len(fs) > 2 for fs in edge_faces.values()):
        raise MeshError("non-manifold edge: an edge is shared by more than two triangles")

    seen = np.zeros(m, dtype=bool)
    for seed in range(m):
        if seen[seed]:
            continue
        seen[seed] = True
        queue = deque([seed])
        while queue:
            f = queue.popleft()
            a, b, c = tris[f]
            for u, v in ((a, b), (b, c), (c, a)):
                for g in edge_faces[(min(u, v), max(u, v))]:
                    if g == f or seen[g]:
                        continue
                    ga, gb, gc = tris[g]
                    # g must traverse the shared edge as v -> u
                    if (u, v) in ((ga, gb), (gb, gc), (gc, ga)):
                        tris[g] = [ga, gc, gb]
                    seen[g] = True
                    queue.append(g)
    return tris


def _compact(vertices: np.ndarray, triangles: np.ndarray):
    used = np.zeros(len(vertices), dtype=bool)
    used[triangles.ravel()] = True
    if used.all():
        return vertices, triangles
    log.warning("dropping %d vertices not referenced by any triangle", int((~used).sum()))
    remap = np.cumsum(used) - 1
    return vertices[used], remap[triangles]


def _read_obj(path: Path):
    verts, faces = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            try:
                if parts[0] == "v":
                    verts.append([float(x) for x in parts[1:4]])
                elif parts[0] == "f":
                    idx = []
                    for tok in parts[1:]:
                        i = int(tok.split("/")[0])
                        idx.append(i - 1 if i > 0 else len(verts) + i)
                    if len(idx) != 3:
                        raise MeshError(f"{path}:{lineno}: only triangle faces are supported")
                    faces.append(idx)
            except (ValueError, IndexError) as exc:
                if isinstance(exc, MeshError):
                    raise
                raise MeshError(f"{path}:{lineno}: cannot parse {line.strip()!r}") from exc
    if not faces:
        raise MeshError(f"{path}: no faces")
    return np.array(verts, dtype=float).reshape(-1, 3), np.array(faces, dtype=np.int64)


_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def _read_ply(path: Path):
    with open(path, "rb") as fh:
        if fh.readline().strip() != b"ply":
            raise MeshError(f"{path}: not a PLY file")
        fmt = None
        elements = []  # (name, count, [(prop, dtype, list_count_dtype|None)])
        while True:
            line = fh.readline()
            if not line:
                raise MeshError(f"{path}: truncated header")
            parts = line.decode("ascii", "replace").split()
            if not parts or parts[0] in ("comment", "obj_info"):
                continue
            if parts[0] == "format":
                fmt = parts[1]
            elif parts[0] == "element":
                elements.append((parts[1], int(parts[2]), []))
            elif parts[0] == "property":
                if parts[1] == "list":
                    elements[-1][2].append((parts[4], _PLY_TYPES[parts[3]], _PLY_TYPES[parts[2]]))
                else:
                    elements[-1][2].append((parts[2], _PLY_TYPES[parts[1]], None))
            elif parts[0] == "end_header":
                break
        if fmt not in ("ascii", "binary_little_endian", "binary_big_endian"):
            raise MeshError(f"{path}: unsupported PLY format {fmt!r}")
        body = fh.read()

    verts = faces = None
    if fmt == "ascii":
        tokens = body.split()
        pos = 0
        for name, count, props in elements:
            rows = []
            for _ in range(count):
                row = []
                for _, _, cnt in props:
                    if cnt is None:
                        row.append(float(tokens[pos]))
                        pos += 1
                    else:
                        k = int(tokens[pos])
                        row.append([int(x) for x in tokens[pos + 1:pos + 1 + k]])
                        pos += 1 + k
                rows.append(row)
            if name == "vertex":
                names = [p[0] for p in props]
                ix = [names.index(c) for c in "xyz"]
                verts = np.array([[r[i] for i in ix] for r in rows], dtype=float).reshape(-1, 3)
            elif name == "face":
                li = next(i for i, p in enumerate(props) if p[2] is not None)
                faces = [r[li] for r in rows]
    else:
        endian = "<" if fmt == "binary_little_endian" else ">"
        offset = 0
        for name, count, props in elements:
            if all(p[2] is None for p in props):
                dt = np.dtype([(p[0], endian + p[1]) for p in props])
                arr = np.frombuffer(body, dtype=dt, count=count, offset=offset)
                offset += dt.itemsize * count
                if name == "vertex":
                    verts = np.stack([arr[c].astype(float) for c in "xyz"], axis=1)
                continue
            rows = []
            for _ in range(count):
                row = None
                for pname, ptype, cnt in props:
                    if cnt is None:
                        offset += np.dtype(ptype).itemsize
                        continue
                    k = int(np.frombuffer(body, dtype=endian + cnt, count=1, offset=offset)[0])
                    offset += np.dtype(cnt).itemsize
                    row = np.frombuffer(body, dtype=endian + ptype, count=k, offset=offset).tolist()
                    offset += np.dtype(ptype).itemsize * k
                rows.append(row)
            if name == "face":
                faces = rows
    if verts is None or faces is None:
        raise MeshError(f"{path}: PLY needs vertex and face elements")
    if any(len(f) != 3 for f in faces):
        raise MeshError(f"{path}: only triangle faces are supported")
    return verts, np.array(faces, dtype=np.int64).reshape(-1, 3)


def load_mesh(path, format=None) -> TriMesh:
    """Read an OBJ or PLY triangle mesh.

    Unreferenced vertices are dropped with a warning and triangle
    orientation is made consistent before validation.

    :param path: file to read
    :param format: ``"obj"`` or ``"ply"``; inferred from the suffix if omitted
    :raises MeshError: on parse errors, bad indices, non-manifold edges or
        degenerate triangles
    """
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    if fmt == "obj":
        verts, faces = _read_obj(path)
    elif fmt == "ply":
        verts, faces = _read_ply(path)
    else:
        raise MeshError(f"unknown mesh format {fmt!r}")
    if faces.min() < 0 or faces.max() >= len(verts):
        raise MeshError(f"{path}: face index out of range")
    verts, faces = _compact(verts, faces)
    faces = _orient_consistently(faces)
    mesh = TriMesh(verts, faces)
    mesh.boundary_loops  # fail early on broken boundaries
    return mesh


def save_obj(mesh: TriMesh, path, uv=None):
    """Write ``mesh`` as OBJ; positions use ``repr`` so a reload is bit-exact.

    If ``uv`` is given it is written as ``vt`` records sharing the vertex index.
    """
    with open(path, "w") as fh:
        for x, y, z in mesh.vertices.tolist():
            fh.write(f"v {x!r} {y!r} {z!r}\n")
        if uv is not None:
            for u, v in np.asarray(uv).tolist():
                fh.write(f"vt {u!r} {v!r}\n")
            for a, b, c in (mesh.triangles + 1).tolist():
                fh.write(f"f {a}/{a} {b}/{b} {c}/{c}\n")
        else:
            for a, b, c in (mesh.triangles + 1).tolist():
                fh.write(f"f {a} {b} {c}\n")


def save_ply(mesh: TriMesh, path, binary=True):
    header = (
        "ply\n"
        f"format {'binary_little_endian' if binary else 'ascii'} 1.0\n"
        f"element vertex {mesh.n_vertices}\n"
        "property double x\nproperty double y\nproperty double z\n"
        f"element face {mesh.n_triangles}\n"
        "property list uchar int vertex_indices\n"
        "end_header\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        if binary:
            fh.write(mesh.vertices.astype("<f8").tobytes())
            faces = np.zeros(mesh.n_triangles, dtype=[("n", "u1"), ("i", "<i4", 3)])
            faces["n"] = 3
            faces["i"] = mesh.triangles
            fh.write(faces.tobytes())
        else:
            for x, y, z in mesh.vertices.tolist():
                fh.write(f"{x!r} {y!r} {z!r}\n".encode())
            for a, b, c in mesh.triangles.tolist():
                fh.write(f"3 {a} {b} {c}\n".encode())


@dataclass
class Neighborhood:
    """Points near ``center`` sorted by ascending distance."""

    center: np.ndarray
    indices: np.ndarray
    distances: np.ndarray
    points: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.indices)


class SpatialIndex:
    """k-d tree over a fixed point set."""

    def __init__(self, points):
        self.points = np.array(points, dtype=float).reshape(-1, 3)
        if len(self.points) == 0:
            raise ValueError("cannot index an empty point set")
        self.points.setflags(write=False)
        self._tree = cKDTree(self.points)

    def __len__(self):
        return len(self.points)

    def knn(self, center, k):
        k = min(int(k), len(self.points))
        d, i = self._tree.query(np.asarray(center, dtype=float), k=k)
        return np.atleast_1d(i), np.atleast_1d(d)

    def radius(self, center, r):
        center = np.asarray(center, dtype=float)
        idx = np.array(self._tree.query_ball_point(center, r), dtype=np.int64)
        d = np.linalg.norm(self.points[idx] - center, axis=1) if len(idx) else np.zeros(0)
        order = np.lexsort((idx, d))
        return idx[order], d[order]


def query_neighborhood(index: SpatialIndex, center, k=None, radius=None) -> Neighborhood:
    """k-nearest (clamped to the point count) or fixed-radius neighborhood.

    :raises ValueError: if the radius query finds nothing or the policy is invalid
    """
    center = np.asarray(center, dtype=float)
    if (k is None) == (radius is None):
        raise ValueError("give exactly one of k or radius")
    if k is not None:
        if k < 1:
            raise ValueError("k must be >= 1")
        idx, d = index.knn(center, k)
    else:
        if radius <= 0:
            raise ValueError("radius must be > 0")
        idx, d = index.radius(center, radius)
        if len(idx) == 0:
            raise ValueError(f"no points within radius {radius}")
    return Neighborhood(center, idx, d, index.points[idx])
