import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blendspline.knots import (KnotLayout, RegionNode, decompose, in_rect, layout_knots, local_cubic_error,
                               open_cubic_knots, uniform_layout)


def bicubic_data(n=400, seed=0):
    rng = np.random.default_rng(seed)
    uv = rng.random((n, 2))
    u, v = uv[:, 0], uv[:, 1]
    z = 1 + u - 2 * v + u ** 3 * v ** 2 - 0.5 * u * v ** 3
    return uv, np.column_stack([u, v, z])


def sinsin(n=100, seed=1):
    rng = np.random.default_rng(seed)
    uv = rng.random((n, 2))
    z = np.sin(2 * np.pi * uv[:, 0]) * np.sin(2 * np.pi * uv[:, 1])
    return uv, np.column_stack([uv, z])


def error_oracle(uv, pts, rect):
    """Bicubic LSQ residual via normal equations on raw monomials."""
    m = in_rect(uv, rect)
    if m.sum() < 16:
        return 0.0
    u, v = uv[m, 0], uv[m, 1]
    A = np.column_stack([u ** i * v ** j for i in range(4) for j in range(4)])
    coef = np.linalg.solve(A.T @ A, A.T @ pts[m])
    return float(np.linalg.norm(A @ coef - pts[m], axis=1).mean())


def test_exact_bicubic_error_is_zero():
    uv, pts = bicubic_data()
    assert local_cubic_error(uv, pts, (0, 1, 0, 1)) < 1e-9


def test_sparse_region_counts_as_converged():
    uv, pts = sinsin()
    assert local_cubic_error(uv, pts, (0.0, 0.01, 0.0, 0.01)) == 0.0


def test_error_matches_oracle():
    uv, pts = sinsin()
    assert np.isclose(local_cubic_error(uv, pts, (0, 1, 0, 1)), error_oracle(uv, pts, (0, 1, 0, 1)), rtol=1e-8)


def test_bicubic_tree_is_single_leaf():
    uv, pts = bicubic_data()
    tree = decompose(uv, pts, kappa=1e-8, max_depth=4)
    assert tree.is_leaf
    assert layout_knots(tree).u_knots.tolist() == [0, 0, 0, 0, 1, 1, 1, 1]


def test_kappa_zero_full_tree():
    rng = np.random.default_rng(2)
    uv = rng.random((3000, 2))
    pts = np.column_stack([uv, rng.normal(0, 0.1, 3000)])
    tree = decompose(uv, pts, kappa=0.0, max_depth=2)
    leaves = list(tree.leaves())
    assert len(leaves) == 16 and all(lf.depth == 2 for lf in leaves)


def test_sinsin_four_leaves():
    uv, pts = sinsin()
    root = error_oracle(uv, pts, (0, 1, 0, 1))
    kids = [error_oracle(uv, pts, r) for r in RegionNode((0, 1, 0, 1), 0, 0, 0).split()]
    assert max(kids) < root
    kappa = 0.5 * (root + max(kids))
    tree = decompose(uv, pts, kappa, max_depth=5)
    assert len(list(tree.leaves())) == 4


def test_layout_examples():
    leaf = RegionNode((0, 1, 0, 1), 0, 0, 0)
    assert layout_knots(leaf).u_knots.tolist() == [0, 0, 0, 0, 1, 1, 1, 1]
    root = RegionNode((0, 1, 0, 1), 0, 0, 0)
    root.children = [RegionNode(r, 1, 0, 0) for r in root.split()]
    assert layout_knots(root).u_knots.tolist() == [0, 0, 0, 0, 0.5, 1, 1, 1, 1]
    ll = root.children[0]
    ll.children = [RegionNode(r, 2, 0, 0) for r in ll.split()]
    lay = layout_knots(root)
    assert np.unique(lay.u_knots).tolist() == [0, 0.25, 0.5, 1]
    assert np.unique(lay.v_knots).tolist() == [0, 0.25, 0.5, 1]
    assert lay.shape == (6, 6)


def test_uniform_layout():
    lay = uniform_layout(10)
    assert lay.n_p_u == 10 and lay.shape == (13, 13)
    assert len(open_cubic_knots([0, 1])) == 8


def test_in_rect_closes_upper_domain_edge():
    uv = np.array([[1.0, 1.0], [0.5, 0.5], [0.5, 0.2]])
    assert in_rect(uv, (0.5, 1.0, 0.5, 1.0)).tolist() == [True, True, False]
    assert in_rect(uv, (0.0, 0.5, 0.0, 0.5)).tolist() == [False, False, False]


def test_decompose_validates():
    uv, pts = sinsin()
    with pytest.raises(ValueError):
        decompose(uv, pts, -1, 2)
    with pytest.raises(ValueError):
        decompose(uv, pts, 0.1, -1)


@settings(max_examples=25, deadline=None)
@given(st.floats(1e-4, 0.2), st.integers(0, 4))
def test_lower_kappa_never_coarsens(kappa, depth):
    uv, pts = sinsin(400, seed=5)
    coarse = layout_knots(decompose(uv, pts, kappa, depth))
    fine = layout_knots(decompose(uv, pts, kappa / 2, depth))
    assert set(np.unique(coarse.u_knots)) <= set(np.unique(fine.u_knots))
    assert fine.n_p_u >= coarse.n_p_u and fine.n_p_v >= coarse.n_p_v
    for lay in (coarse, fine):
        assert len(lay.u_knots) == lay.n_p_u + 7 and isinstance(lay, KnotLayout)
