import logging

import numpy as np
import pytest

from blendspline.holefill import (Candidate, FillParams, FrontEdge, HoleFillError, HoleFront, attach_candidate,
                                  classify_loops, fill_holes, front_advance_distance, grow_front, hole_angle,
                                  segments_intersect)
from blendspline.mesh import TriMesh
from blendspline.mls import MlsConfig
from blendspline.synthetic import generate_synthetic

from oracles import segments_cross_exact


def annulus(n, rings=4, r0=1.0, dr=None, lift=None):
    """Planar (or lifted) ring mesh whose inner boundary is a regular ``n``-gon hole."""
    dr = dr if dr is not None else 2 * np.pi * r0 / n
    verts, tris = [], []
    for k in range(rings + 1):
        r = r0 + k * dr
        for i in range(n):
            a = 2 * np.pi * i / n
            verts.append([r * np.cos(a), r * np.sin(a), 0.0])
    for k in range(rings):
        for i in range(n):
            a, b = k * n + i, k * n + (i + 1) % n
            c, d = a + n, b + n
            tris += [(a, b, d), (a, d, c)]
    v = np.array(verts)
    if lift is not None:
        v = lift(v)
    return TriMesh(v, tris)


def front_for(mesh, phi=5 * np.pi / 9):
    _, holes = classify_loops(mesh)
    verts = [p.copy() for p in mesh.vertices]
    tris = [tuple(t) for t in mesh.triangles.tolist()]
    return HoleFront(verts, tris, holes[0], FillParams(phi=phi), MlsConfig().resolve(mesh.vertices))


def test_classify_loops_disc_with_hole():
    s = generate_synthetic("punctured-disc", 600)
    outer, holes = classify_loops(s.mesh)
    assert len(holes) == 1 and len(outer) > len(holes[0])


def test_classify_tie_warns(caplog):
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [5, 0, 0], [6, 0, 0], [5, 1, 0]], dtype=float)
    loops = [[0, 1, 2], [3, 4, 5]]
    with caplog.at_level(logging.WARNING):
        outer, holes = classify_loops(loops, v)
    assert outer == [0, 1, 2] and holes == [[3, 4, 5]]
    assert "equal length" in caplog.text
    with pytest.raises(ValueError):
        classify_loops([], v)


def test_d_rule():
    a = 0.7
    assert abs(front_advance_distance(a, a) - np.sqrt(3) / 2 * a) <= 1e-12
    assert front_advance_distance(0.0, a) == a
    assert 0 < front_advance_distance(2 * a - 1e-9, a) < 1e-3
    assert np.isclose(front_advance_distance(a, a, "equilateral"), np.sqrt(3) / 2 * a)


def test_d_rule_fallback_warns(caplog):
    with caplog.at_level(logging.WARNING):
        d = front_advance_distance(3.0, 1.0)
    assert np.isclose(d, np.sqrt(3) / 2 * 3.0) and "2a" in caplog.text


def test_hole_angle():
    assert np.isclose(hole_angle([1, 0], np.zeros(2), [0, 1]), np.pi / 2)
    assert np.isclose(hole_angle([0, 1], np.zeros(2), [1, 0]), 3 * np.pi / 2)


def test_segments_intersect_matches_shapely():
    rng = np.random.default_rng(0)
    for _ in range(2000):
        p = rng.integers(0, 4, (4, 2)).astype(float)
        if np.array_equal(p[0], p[1]) or np.array_equal(p[2], p[3]):
            continue
        assert segments_intersect(*p) == segments_cross_exact(*p)


def test_triangle_hole_closed_by_one_triangle():
    m = annulus(3, rings=3, dr=0.6)
    events = []
    out = fill_holes(m, events=events)
    assert out.n_triangles == m.n_triangles + 1
    assert len(out.boundary_loops) == 1 and [e.kind for e in events] == ["close"]


@pytest.mark.parametrize("n", [5, 6])
def test_regular_polygon_has_no_ears(n):
    # interior angles 108 and 120 degrees both exceed the 100 degree default
    assert front_for(annulus(n, rings=3)).ear_candidates(5 * np.pi / 9) == []


def test_square_hole_ears():
    f = front_for(annulus(4, rings=3))
    cands = f.ear_candidates(5 * np.pi / 9)
    assert len(cands) == 4 and all(np.isclose(c[0], np.pi / 2) for c in cands)


def test_planar_candidates_lie_in_plane():
    # 12 edges of length ~a on a radius-2 circle: a hole of radius about 2a
    m = annulus(12, rings=4, r0=2.0)
    f = front_for(m)
    cands = grow_front(f)
    assert len(cands) == 12
    assert max(abs(c.point[2]) for c in cands) < 1e-6
    # every candidate advances into the hole
    assert all(np.linalg.norm(c.point[:2]) < np.linalg.norm(c.edge.midpoint[:2]) for c in cands)


def test_sphere_cap_candidates_near_sphere():
    R = 3.0

    def lift(v):
        z = np.sqrt(R * R - (v[:, 0] ** 2 + v[:, 1] ** 2))
        return np.column_stack([v[:, :2], z])

    m = annulus(20, rings=5, r0=1.0, lift=lift)
    f = front_for(m)
    for c in grow_front(f):
        assert abs(np.linalg.norm(c.point) - R) < 0.05 * f.a


def test_grow_front_needs_more_than_three():
    f = front_for(annulus(3, rings=3, dr=0.6))
    with pytest.raises(ValueError):
        grow_front(f)


def test_attach_accepts_centered_candidate():
    m = annulus(12, rings=4)
    f = front_for(m)
    u, v = f.loop[0], f.loop[1]
    mid = 0.5 * (f.verts[u] + f.verts[v])
    edge = FrontEdge(u, v, mid, mid, f.edge_normal(u, v))
    inward = -mid / np.linalg.norm(mid) * 0.8 * f.a
    n0 = len(f.loop)
    assert attach_candidate(f, Candidate(mid + inward, edge))
    assert len(f.loop) == n0 + 1


def test_attach_rejects_candidate_outside_surface():
    m = annulus(12, rings=4)
    f = front_for(m)
    u, v = f.loop[0], f.loop[1]
    mid = 0.5 * (f.verts[u] + f.verts[v])
    edge = FrontEdge(u, v, mid, mid, f.edge_normal(u, v))
    outward = mid / np.linalg.norm(mid) * 0.8 * f.a
    assert not attach_candidate(f, Candidate(mid + outward, edge))


def test_punctured_disc_fill_is_planar():
    s = generate_synthetic("punctured-disc", 2500)
    _, holes = classify_loops(s.mesh)
    a = np.mean([np.linalg.norm(s.mesh.vertices[h] - s.mesh.vertices[np.roll(h, -1)], axis=1).mean()
                 for h in holes])
    out = fill_holes(s.mesh)
    assert len(out.boundary_loops) == 1
    new = out.vertices[s.mesh.n_vertices:]
    assert len(new) > 0 and np.abs(new[:, 2]).max() < 1e-3 * a
    # original geometry untouched
    assert np.array_equal(out.vertices[:s.mesh.n_vertices], s.mesh.vertices)
    assert np.array_equal(out.triangles[:s.mesh.n_triangles], s.mesh.triangles)


def test_three_holes_and_identity():
    s = generate_synthetic("punctured-disc", 2500, holes=3, seed=3)
    assert len(s.mesh.boundary_loops) == 4
    assert len(fill_holes(s.mesh).boundary_loops) == 1
    plain = generate_synthetic("plane", 400).mesh
    assert fill_holes(plain) is plain


def test_phi_zero_still_terminates():
    s = generate_synthetic("punctured-disc", 1200)
    out = fill_holes(s.mesh, FillParams(phi=0.0))
    assert len(out.boundary_loops) == 1
    assert out.triangle_areas().min() > 0


def test_iteration_cap_reports_residual_front():
    s = generate_synthetic("punctured-disc", 2500)
    with pytest.raises(HoleFillError) as exc:
        fill_holes(s.mesh, FillParams(max_front_iterations=1))
    assert exc.value.residual_loop and len(exc.value.points) == len(exc.value.residual_loop)


def test_fill_params_validation():
    with pytest.raises(ValueError):
        FillParams(phi=np.pi)
    with pytest.raises(ValueError):
        FillParams(d_rule="other")
