import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blendspline.mesh import MeshError, SpatialIndex, TriMesh, load_mesh, query_neighborhood, save_obj, save_ply
from blendspline.synthetic import grid_mesh


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_single_face_obj(tmp_path):
    m = load_mesh(write(tmp_path, "t.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n"))
    assert m.n_triangles == 1
    assert [len(lp) for lp in m.boundary_loops] == [3]


def test_obj_face_variants(tmp_path):
    text = "# c\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvt 0 0\nf 1/1 2/1 3/1\nf 1//1 3//1 4//1\n"
    m = load_mesh(write(tmp_path, "q.obj", text))
    assert m.n_triangles == 2
    assert len(m.boundary_loops) == 1 and len(m.boundary_loops[0]) == 4


def test_tetrahedron_has_no_loops(tmp_path):
    text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 3 2\nf 1 2 4\nf 2 3 4\nf 3 1 4\n"
    m = load_mesh(write(tmp_path, "tet.obj", text))
    assert m.boundary_loops == []
    assert m.n_boundary_edges() == 0


def test_edge_in_three_faces_is_rejected():
    v = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1]]
    with pytest.raises(MeshError):
        TriMesh(v, [[0, 1, 2], [1, 0, 3], [0, 1, 4]])


def test_grid_with_removed_quad_has_two_loops():
    v, t = grid_mesh(5, 5)
    # drop the two triangles of the interior cell [0.25, 0.5]^2
    cx = v[t, :2].mean(axis=1)
    keep = ~((cx[:, 0] > 0.25) & (cx[:, 0] < 0.5) & (cx[:, 1] > 0.25) & (cx[:, 1] < 0.5))
    m = TriMesh(v, t[keep])
    loops = m.boundary_loops
    assert len(loops) == 2
    assert sorted(len(lp) for lp in loops) == [4, 16]
    assert m.n_boundary_edges() == sum(len(lp) for lp in loops)


def test_unit_square_loop():
    m = TriMesh([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], [[0, 1, 2], [0, 2, 3]])
    assert len(m.boundary_loops) == 1 and sorted(m.boundary_loops[0]) == [0, 1, 2, 3]


def test_inconsistent_orientation(tmp_path):
    with pytest.raises(MeshError):
        TriMesh([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], [[0, 1, 2], [0, 3, 2]])
    m = load_mesh(write(tmp_path, "flip.obj", "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3\nf 1 4 3\n"))
    n = m.triangle_normals()
    assert np.allclose(n[0], n[1])


def test_obj_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    v, t = grid_mesh(6, 7)
    v = v + rng.normal(0, 1e-3, v.shape) * np.pi
    m = TriMesh(v, t)
    save_obj(m, tmp_path / "m.obj")
    back = load_mesh(tmp_path / "m.obj")
    assert np.array_equal(back.vertices, m.vertices)
    assert np.array_equal(back.triangles, m.triangles)


def test_ply_round_trip(tmp_path):
    v, t = grid_mesh(4, 4)
    m = TriMesh(v * 1.1, t)
    for binary in (True, False):
        save_ply(m, tmp_path / "m.ply", binary=binary)
        back = load_mesh(tmp_path / "m.ply")
        assert np.array_equal(back.vertices, m.vertices)
        assert np.array_equal(back.triangles, m.triangles)


def test_collinear_queries():
    idx = SpatialIndex([[0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]])
    nb = query_neighborhood(idx, [0, 0, 0], k=2)
    assert set(nb.indices.tolist()) == {0, 1}
    nb = query_neighborhood(idx, [0, 0, 0], radius=1.5)
    assert set(nb.indices.tolist()) == {0, 1}
    assert len(query_neighborhood(idx, [0, 0, 0], k=50)) == 4


def test_query_errors():
    idx = SpatialIndex([[0, 0, 0], [1, 0, 0]])
    with pytest.raises(ValueError):
        query_neighborhood(idx, [10, 0, 0], radius=0.5)
    with pytest.raises(ValueError):
        query_neighborhood(idx, [0, 0, 0])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.integers(1, 20), r=st.floats(0.05, 0.6))
def test_queries_match_brute_force(seed, k, r):
    rng = np.random.default_rng(seed)
    pts = rng.random((100, 3))
    c = rng.random(3)
    idx = SpatialIndex(pts)
    d = np.linalg.norm(pts - c, axis=1)
    nb = query_neighborhood(idx, c, k=k)
    assert np.allclose(np.sort(nb.distances), np.sort(d)[:k])
    assert np.all(np.diff(nb.distances) >= 0)
    inside = np.flatnonzero(d <= r)
    if len(inside):
        assert set(query_neighborhood(idx, c, radius=r).indices.tolist()) == set(inside.tolist())


def test_vertex_normals_of_flat_grid():
    v, t = grid_mesh(4, 4)
    n = TriMesh(v, t).vertex_normals()
    assert np.allclose(np.abs(n[:, 2]), 1.0)
