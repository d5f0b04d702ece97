import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blendspline.mesh import TriMesh
from blendspline.parameterize import (ParameterizationError, auto_corners, mean_value_weights, parameterize,
                                      pin_boundary, solve_parameterization)
from blendspline.synthetic import grid_mesh

from oracles import mvc_weights_oracle


def fan(ring, center=(0.0, 0.0, 0.0)):
    ring = np.asarray(ring, dtype=float)
    n = len(ring)
    v = np.vstack([center, ring])
    tris = [(0, 1 + i, 1 + (i + 1) % n) for i in range(n)]
    return TriMesh(v, tris)


def regular_ring(n, r=1.0):
    a = 2 * np.pi * np.arange(n) / n
    return np.column_stack([r * np.cos(a), r * np.sin(a), np.zeros(n)])


@pytest.mark.parametrize("n", [4, 6])
def test_symmetric_fans(n):
    w = mean_value_weights(fan(regular_ring(n)), 0)
    assert np.allclose(w.weights, 1.0 / n, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 100_000), st.integers(3, 9))
def test_random_fan_matches_oracle(seed, n):
    rng = np.random.default_rng(seed)
    ang = np.sort(rng.uniform(0, 2 * np.pi, n))
    gaps = np.diff(np.concatenate([ang, [ang[0] + 2 * np.pi]]))
    if gaps.max() >= np.pi * 0.95 or gaps.min() < 0.05:
        return  # keep the centre strictly inside a star-shaped fan
    r = rng.uniform(0.5, 2.0, n)
    ring = np.column_stack([r * np.cos(ang), r * np.sin(ang), rng.normal(0, 0.2, n)])
    center = np.array([0.0, 0.0, rng.normal(0, 0.1)])
    w = mean_value_weights(fan(ring, center), 0)
    oracle = mvc_weights_oracle(center, ring)
    assert np.all(w.weights > 0)
    assert abs(w.weights.sum() - 1) < 1e-12
    assert np.allclose(w.weights, oracle[w.neighbors - 1], atol=1e-12)


def test_pin_equal_chords():
    ring = np.array([[0, 0], [1, 0], [2, 0], [2, 1], [2, 2], [1, 2], [0, 2], [0, 1]], dtype=float)
    v = np.column_stack([ring, np.zeros(8)])
    uv = pin_boundary(list(range(8)), v, corners=[0, 2, 4, 6])
    assert uv[1] == (0.5, 0.0) and uv[3] == (1.0, 0.5) and uv[5] == (0.5, 1.0) and uv[7] == (0.0, 0.5)
    assert uv[0] == (0.0, 0.0) and uv[4] == (1.0, 1.0)


def test_pin_unequal_chord():
    v = np.array([[0, 0, 0], [1, 0, 0], [4, 0, 0], [4, 1, 0], [0, 1, 0]], dtype=float)
    uv = pin_boundary([0, 1, 2, 3, 4], v, corners=[0, 2, 3, 4])
    assert np.isclose(uv[1][0], 0.25) and uv[1][1] == 0.0


def test_pin_errors():
    v = regular_ring(8)
    with pytest.raises(ParameterizationError):
        pin_boundary(list(range(8)), v, corners=[0, 2, 4])
    with pytest.raises(ParameterizationError):
        pin_boundary(list(range(8)), v, corners=[0, 4, 2, 6])


def test_auto_corners_are_distinct_and_ordered():
    loop = list(range(10))
    c = auto_corners(loop, regular_ring(10))
    assert len(set(c)) == 4 and c == sorted(c)


def test_flat_grid_uv_is_xy():
    v, t = grid_mesh(12, 9, 0, 3, 0, 2)
    m = TriMesh(v, t)
    corners = [0, 11, 12 * 9 - 1, 12 * 8]
    par = parameterize(m, corners)
    assert np.abs(par.uv - v[:, :2] / [3, 2]).max() < 1e-7
    assert par.residual < 1e-9
    # cross-check the interior against a dense solve of the same convex-combination system
    interior = np.flatnonzero(~m.boundary_vertices())
    pos = {int(x): i for i, x in enumerate(interior)}
    A = np.eye(len(interior))
    b = np.zeros((len(interior), 2))
    for v_ in interior:
        cw = mean_value_weights(m, int(v_))
        for j, w in zip(cw.neighbors, cw.weights):
            if int(j) in pos:
                A[pos[int(v_)], pos[int(j)]] -= w
            else:
                b[pos[int(v_)]] += w * par.uv[j]
    assert np.abs(np.linalg.solve(A, b) - par.uv[interior]).max() < 1e-10


def test_single_interior_vertex():
    ring = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float)
    par = parameterize(fan(ring, center=(0.5, 0.5, 0.0)), corners=[1, 2, 3, 4])
    assert np.allclose(par.uv[0], par.uv[1:].mean(axis=0), atol=1e-12)
    # mean value coordinates reproduce linear functions, so an off-centre vertex keeps its position
    par = parameterize(fan(ring, center=(0.3, 0.6, 0.0)), corners=[1, 2, 3, 4])
    assert np.allclose(par.uv[0], [0.3, 0.6], atol=1e-12)


def test_disconnected_mesh_raises():
    v, t = grid_mesh(4, 4)
    v2 = v + [5, 0, 0]
    m = TriMesh(np.vstack([v, v2]), np.vstack([t, t + len(v)]))
    pinned = pin_boundary(m.boundary_loops[0], m.vertices)
    with pytest.raises(ParameterizationError):
        solve_parameterization(m, pinned)


def test_holey_mesh_is_rejected():
    v, t = grid_mesh(6, 6)
    cx = v[t, :2].mean(axis=1)
    keep = ~((np.abs(cx[:, 0] - 0.5) < 0.1) & (np.abs(cx[:, 1] - 0.5) < 0.1))
    with pytest.raises(ParameterizationError):
        parameterize(TriMesh(v, t[keep]))
