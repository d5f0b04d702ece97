"""Adaptive knot placement by recursive quadrant subdivision of the uv square."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RegionNode",
    "KnotLayout",
    "in_rect",
    "local_cubic_error",
    "decompose",
    "layout_knots",
    "open_cubic_knots",
    "uniform_layout",
]


@dataclass
class RegionNode:
    """A rectangle ``(u0, u1, v0, v1)`` of the parameter domain.

    Children, when present, are the four center-split quadrants ordered
    ``(lower-left, lower-right, upper-left, upper-right)``.
    """

    rect: tuple[float, float, float, float]
    depth: int
    local_error: float
    n_points: int
    children: list["RegionNode"] = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def leaves(self):
        if self.is_leaf:
            yield self
        else:
            for c in self.children:
                yield from c.leaves()

    def split(self):
        u0, u1, v0, v1 = self.rect
        um, vm = 0.5 * (u0 + u1), 0.5 * (v0 + v1)
        return [(u0, um, v0, vm), (um, u1, v0, vm), (u0, um, vm, v1), (um, u1, vm, v1)]


@dataclass
class KnotLayout:
    u_knots: np.ndarray
    v_knots: np.ndarray

    @property
    def n_p_u(self) -> int:
        return len(self.u_knots) - 7

    @property
    def n_p_v(self) -> int:
        return len(self.v_knots) - 7

    @property
    def shape(self) -> tuple[int, int]:
        """Control mesh size ``(a, b)``."""
        return self.n_p_u + 3, self.n_p_v + 3


def open_cubic_knots(breakpoints) -> np.ndarray:
    """Breakpoints with both end values repeated to multiplicity four."""
    b = np.asarray(breakpoints, dtype=float)
    return np.concatenate([[b[0]] * 3, b, [b[-1]] * 3])


def uniform_layout(n_u, n_v=None, lo=0.0, hi=1.0) -> KnotLayout:
    n_v = n_u if n_v is None else n_v
    return KnotLayout(open_cubic_knots(np.linspace(lo, hi, n_u + 1)),
                      open_cubic_knots(np.linspace(lo, hi, n_v + 1)))


def in_rect(uv, rect, domain=(0.0, 1.0, 0.0, 1.0)):
    """Half-open membership ``[u0, u1) x [v0, v1)``, closed on the domain's upper edges."""
    u, v = uv[:, 0], uv[:, 1]
    u0, u1, v0, v1 = rect
    mu = (u >= u0) & ((u < u1) | ((u1 == domain[1]) & (u == u1)))
    mv = (v >= v0) & ((v < v1) | ((v1 == domain[3]) & (v == v1)))
    return mu & mv


def _bicubic_design(u, v, rect):
    u0, u1, v0, v1 = rect
    s = (2 * u - (u0 + u1)) / (u1 - u0)
    t = (2 * v - (v0 + v1)) / (v1 - v0)
    sp = np.stack([s ** i for i in range(4)], axis=1)
    tp = np.stack([t ** j for j in range(4)], axis=1)
    return (sp[:, :, None] * tp[:, None, :]).reshape(len(u), 16)


def local_cubic_error(uv, points, rect, mask=None) -> float:
    """Mean per-point residual norm of a per-coordinate bicubic LSQ fit.

    Regions with fewer than 16 points count as converged (error 0).
    """
    if mask is None:
        mask = in_rect(uv, rect)
    if mask.sum() < 16:
        return 0.0
    sub = uv[mask]
    A = _bicubic_design(sub[:, 0], sub[:, 1], rect)
    P = points[mask]
    coef, *_ = np.linalg.lstsq(A, P, rcond=None)
    res = A @ coef - P
    return float(np.linalg.norm(res, axis=1).mean())


def decompose(uv, points, kappa, max_depth) -> RegionNode:
    """Split regions at their center until the bicubic error is ``<= kappa``
    or ``max_depth`` is reached."""
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    uv = np.asarray(uv, dtype=float)
    points = np.asarray(points, dtype=float)

    def build(rect, depth, idx):
        sub_uv = uv[idx]
        err = local_cubic_error(sub_uv, points[idx], rect, mask=np.ones(len(idx), dtype=bool))
        node = RegionNode(rect, depth, err, len(idx))
        if err <= kappa or depth >= max_depth:
            return node
        for child in node.split():
            m = in_rect(sub_uv, child)
            node.children.append(build(child, depth + 1, idx[m]))
        return node

    root_idx = np.flatnonzero(in_rect(uv, (0.0, 1.0, 0.0, 1.0)))
    return build((0.0, 1.0, 0.0, 1.0), 0, root_idx)


def layout_knots(tree: RegionNode) -> KnotLayout:
    """Tensor knot vectors from the union of all leaf boundaries."""
    us, vs = set(), set()
    for leaf in tree.leaves():
        u0, u1, v0, v1 = leaf.rect
        us.update((u0, u1))
        vs.update((v0, v1))
    return KnotLayout(open_cubic_knots(sorted(us)), open_cubic_knots(sorted(vs)))
