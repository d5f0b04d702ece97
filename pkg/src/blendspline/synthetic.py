"""Deterministic synthetic meshes with known ground-truth surfaces."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .mesh import TriMesh

__all__ = ["SyntheticSurface", "KINDS", "grid_mesh", "disc_mesh", "cut_holes", "generate_synthetic",
           "sincos", "bicubic"]

KINDS = ("plane", "sincos", "bicubic", "sphere-cap", "punctured-disc")


def sincos(x, y):
    return np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y)


_BICUBIC = np.array([
    [0.10, -0.30, 0.20, 0.15],
    [0.25, 0.40, -0.50, 0.10],
    [-0.20, 0.30, 0.10, -0.20],
    [0.05, -0.10, 0.20, 0.30],
])


def bicubic(x, y):
    """A fixed bicubic polynomial ``sum c_ij x^i y^j`` with ``i, j <= 3``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xp = np.stack([x ** i for i in range(4)], axis=-1)
    yp = np.stack([y ** j for j in range(4)], axis=-1)
    return np.einsum("...i,ij,...j->...", xp, _BICUBIC, yp)


@dataclass
class SyntheticSurface:
    """A generated mesh plus an oracle for the surface it samples.

    ``distance(points)`` is the unsigned distance to the ground-truth surface
    (exact for the plane, disc and sphere; vertical distance for height
    fields).  ``corners`` are the four boundary vertices at the parameter
    square corners for grid-based kinds.
    """

    kind: str
    mesh: TriMesh
    clean: np.ndarray
    distance: Callable[[np.ndarray], np.ndarray]
    height: Callable | None = None
    corners: list[int] = field(default_factory=list)


def grid_mesh(nx, ny, x0=0.0, x1=1.0, y0=0.0, y1=1.0):
    """Regular ``nx x ny`` grid split into counterclockwise triangles.

    Vertex ``(i, j)`` (column ``i`` along x, row ``j`` along y) has index
    ``j * nx + i``.  Diagonals alternate so the triangulation is symmetric.
    """
    xs = np.linspace(x0, x1, nx)
    ys = np.linspace(y0, y1, ny)
    X, Y = np.meshgrid(xs, ys)
    verts = np.column_stack([X.ravel(), Y.ravel(), np.zeros(X.size)])
    tris = []
    for j in range(ny - 1):
        for i in range(nx - 1):
            a = j * nx + i
            b, c, d = a + 1, a + nx + 1, a + nx
            if (i + j) % 2 == 0:
                tris += [(a, b, c), (a, c, d)]
            else:
                tris += [(a, b, d), (b, c, d)]
    return verts, np.array(tris, dtype=np.int64)


def disc_mesh(rings, radius=1.0):
    """Concentric-ring triangulation of a disc; ring ``i`` holds ``6 i`` vertices."""
    verts = [(0.0, 0.0, 0.0)]
    starts = [0]
    for i in range(1, rings + 1):
        starts.append(len(verts))
        n = 6 * i
        for k in range(n):
            a = 2 * np.pi * k / n
            verts.append((radius * i / rings * np.cos(a), radius * i / rings * np.sin(a), 0.0))
    tris = [(0, 1 + k, 1 + (k + 1) % 6) for k in range(6)]
    for i in range(1, rings):
        inner = [starts[i] + k for k in range(6 * i)]
        outer = [starts[i + 1] + k for k in range(6 * (i + 1))]
        ni, no = len(inner), len(outer)
        a = b = 0
        while a < ni or b < no:
            # advance whichever ring lags in angle
            ang_in = (a + 1) / ni
            ang_out = (b + 1) / no
            if b < no and (a >= ni or ang_out <= ang_in):
                tris.append((inner[a % ni], outer[b], outer[(b + 1) % no]))
                b += 1
            else:
                tris.append((inner[a % ni], outer[b % no], inner[(a + 1) % ni]))
                a += 1
    return np.array(verts, dtype=float), np.array(tris, dtype=np.int64)


def cut_holes(verts, tris, centers, radius):
    """Remove vertices within ``radius`` of any center (xy distance) and compact."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    d = np.min(np.linalg.norm(verts[:, None, :2] - centers[None, :, :2], axis=2), axis=1)
    keep_v = d > radius
    keep_t = keep_v[tris].all(axis=1)
    tris = tris[keep_t]
    used = np.zeros(len(verts), dtype=bool)
    used[tris.ravel()] = True
    remap = np.cumsum(used) - 1
    return verts[used], remap[tris], np.flatnonzero(used)


def _hole_centers(n_holes, rng, lo, hi, spacing):
    centers = []
    tries = 0
    while len(centers) < n_holes:
        c = rng.uniform(lo, hi, size=2)
        if all(np.linalg.norm(c - o) > spacing for o in centers):
            centers.append(c)
        tries += 1
        if tries > 10000:
            raise RuntimeError("could not place holes")
    return np.array(centers)


def generate_synthetic(kind, n, noise=0.0, seed=0, holes=0, hole_radius=None,
                       hole_center=None) -> SyntheticSurface:
    """Build a noisy triangulated sample of a known surface.

    :param kind: one of :data:`KINDS`
    :param n: approximate vertex count before holes are cut
    :param noise: standard deviation of displacement along the surface
        normal (z for height fields, radial for the sphere cap)
    :param seed: RNG seed; the output depends only on the arguments
    :param holes: number of circular holes to cut (``punctured-disc``
        defaults to one)
    :param hole_center: xy center of a single hole; the default avoids the
        steep saddle of ``sincos`` by using its trough at ``(0.25, 0.5)``
    """
    if kind not in KINDS:
        raise ValueError(f"unknown synthetic kind {kind!r}; choose from {KINDS}")
    if n < 4:
        raise ValueError("n must be >= 4")
    if noise < 0:
        raise ValueError("noise must be >= 0")
    rng = np.random.default_rng(seed)

    if kind == "punctured-disc":
        rings = max(2, int(round((-3 + np.sqrt(9 + 12 * (n - 1))) / 6)))
        verts, tris = disc_mesh(rings)
        holes = holes or 1
        spacing = 2.0 / rings
        hr = hole_radius if hole_radius is not None else (0.25 if holes == 1 else 0.15)
        if holes == 1:
            centers = np.array([hole_center if hole_center is not None else (0.1, -0.05)], dtype=float)
        else:
            centers = _hole_centers(holes, rng, -0.55, 0.55, 2 * hr + 3 * spacing)
        verts, tris, _ = cut_holes(verts, tris, centers, hr)
        clean = verts.copy()
        verts[:, 2] += rng.normal(0.0, noise, len(verts)) if noise > 0 else 0.0
        mesh = TriMesh(verts, tris)
        return SyntheticSurface(kind, mesh, clean, lambda p: np.abs(np.asarray(p)[..., 2]),
                                height=lambda x, y: np.zeros_like(np.asarray(x, dtype=float)))

    side = max(2, int(round(np.sqrt(n))))
    verts, tris = grid_mesh(side, side)
    corner_ids = [0, side - 1, side * side - 1, side * (side - 1)]
    if kind == "sphere-cap":
        verts[:, :2] = verts[:, :2] - 0.5
    if holes:
        spacing = 1.0 / (side - 1)
        hr = hole_radius if hole_radius is not None else 0.1
        lo, hi = (0.25, 0.75) if kind != "sphere-cap" else (-0.25, 0.25)
        if holes == 1:
            if hole_center is None:
                hole_center = (0.25, 0.5) if kind == "sincos" else ((lo + hi) / 2, (lo + hi) / 2)
            centers = np.array([hole_center], dtype=float)
        else:
            centers = _hole_centers(holes, rng, lo, hi, 2 * hr + 3 * spacing)
        verts, tris, kept = cut_holes(verts, tris, centers, hr)
        remap = {int(o): i for i, o in enumerate(kept)}
        corner_ids = [remap[c] for c in corner_ids]

    x, y = verts[:, 0], verts[:, 1]
    height = None
    if kind == "plane":
        height = lambda x, y: np.zeros_like(np.asarray(x, dtype=float))  # noqa: E731
    elif kind == "sincos":
        height = sincos
    elif kind == "bicubic":
        height = bicubic

    if height is not None:
        verts[:, 2] = height(x, y)
        clean = verts.copy()
        if noise > 0:
            verts[:, 2] += rng.normal(0.0, noise, len(verts))

        def distance(p, height=height):
            p = np.asarray(p, dtype=float)
            return np.abs(p[..., 2] - height(p[..., 0], p[..., 1]))
    else:
        radial = verts[:, :2]
        z = np.sqrt(1.0 - np.sum(radial ** 2, axis=1))
        verts = np.column_stack([radial, z])
        clean = verts.copy()
        if noise > 0:
            verts *= (1.0 + rng.normal(0.0, noise, len(verts)))[:, None]

        def distance(p):
            return np.abs(np.linalg.norm(np.asarray(p, dtype=float), axis=-1) - 1.0)

    mesh = TriMesh(verts, tris)
    return SyntheticSurface(kind, mesh, clean, distance, height, corner_ids)
