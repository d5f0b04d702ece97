"""Cubic B-spline curves and tensor-product surfaces fitted by blending local fits.

Each knot interval (patch) gets its own weighted least-squares fit of the
four (curve) or sixteen (surface) basis functions that are non-zero on it.
Windowed weights keep neighbouring data in play so adjacent local fits
agree, and the global control points are averages of the local
coefficients that refer to the same basis function.  A global SVD
least-squares fit over the same knots is provided as the reference.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .knots import KnotLayout
from .linalg import weighted_lstsq
from .mesh import TriMesh

__all__ = [
    "DEGREE",
    "BasisContext",
    "BlendWeights",
    "LocalPatchFit",
    "ControlMesh",
    "FitStats",
    "eval_basis",
    "basis_matrix",
    "window_weight",
    "fit_local_patch_curve",
    "fit_local_patch_surface",
    "blend_curve",
    "blend_surface",
    "fit_blended_curve",
    "fit_blended_surface",
    "global_lsq_curve",
    "global_lsq_fit",
    "evaluate_curve",
    "evaluate_surface",
    "fit_error",
]

DEGREE = 3
GATHER_CUTOFF = 1e-4
LOCAL_RIDGE = 1e-10


class BasisContext:
    """Open cubic knot vector ``t_0 .. t_n`` and the operations on it.

    Interior knots must be strictly increasing so every patch (knot
    interval between consecutive distinct knots) is non-empty; the global
    fitter also accepts repeated interior knots via ``strict=False``.
    """

    def __init__(self, knots, strict=True):
        t = np.asarray(knots, dtype=float)
        if t.ndim != 1 or len(t) < 8:
            raise ValueError("a cubic knot vector needs at least 8 knots")
        if np.any(np.diff(t) < 0):
            raise ValueError("knots must be nondecreasing")
        if not (np.all(t[:4] == t[0]) and np.all(t[-4:] == t[-1])):
            raise ValueError("end knots must have multiplicity 4")
        if t[0] == t[-1]:
            raise ValueError("empty parameter domain")
        if strict and np.any(np.diff(t[3:-3]) <= 0):
            raise ValueError("interior knots must be strictly increasing")
        self.knots = t
        self.knots.setflags(write=False)

    def __repr__(self):
        return f"BasisContext({self.knots.tolist()})"

    @property
    def n_basis(self) -> int:
        return len(self.knots) - DEGREE - 1

    @property
    def n_patches(self) -> int:
        return self.n_basis - DEGREE

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[DEGREE]), float(self.knots[-DEGREE - 1])

    def patch_interval(self, p) -> tuple[float, float]:
        return float(self.knots[p + DEGREE]), float(self.knots[p + DEGREE + 1])

    def check_domain(self, t):
        lo, hi = self.domain
        t = np.asarray(t, dtype=float)
        if np.any((t < lo) | (t > hi)) or np.any(~np.isfinite(t)):
            raise ValueError(f"parameter outside the domain [{lo}, {hi}]")

    def find_span(self, t):
        """Knot index ``s`` with ``t_s <= t < t_{s+1}``; the domain end maps to the last span."""
        t = np.asarray(t, dtype=float)
        s = np.searchsorted(self.knots, t, side="right") - 1
        return np.clip(s, DEGREE, self.n_basis - 1)

    def basis_funs(self, span, t):
        """The four cubic basis polynomials of ``span`` evaluated at ``t``.

        ``t`` need not lie inside the span; outside it the polynomial pieces
        are extended, which is what the local fits use.  Shapes broadcast
        to ``(..., 4)``.
        """
        U = self.knots
        t = np.asarray(t, dtype=float)
        span = np.broadcast_to(np.asarray(span), t.shape)
        N = np.zeros(t.shape + (DEGREE + 1,))
        N[..., 0] = 1.0
        left = np.zeros(t.shape + (DEGREE + 1,))
        right = np.zeros(t.shape + (DEGREE + 1,))
        for j in range(1, DEGREE + 1):
            left[..., j] = t - U[span + 1 - j]
            right[..., j] = U[span + j] - t
            saved = np.zeros(t.shape)
            for r in range(j):
                denom = right[..., r + 1] + left[..., j - r]
                temp = np.divide(N[..., r], denom, out=np.zeros(t.shape), where=denom != 0)
                N[..., r] = saved + right[..., r + 1] * temp
                saved = left[..., j - r] * temp
            N[..., j] = saved
        return N


@dataclass(frozen=True)
class BlendWeights:
    """Mixing weights for the four local coefficients that share a global slot."""

    r0: float = 0.0
    r1: float = 0.5
    r2: float = 0.5
    r3: float = 0.0

    def __post_init__(self):
        if not np.isclose(self.r0 + self.r1 + self.r2 + self.r3, 1.0, rtol=0, atol=1e-12):
            raise ValueError("blend weights must sum to 1")


@dataclass
class LocalPatchFit:
    """Coefficients of one local fit: shape ``(4, dim)`` for curves,
    ``(4, 4, dim)`` for surfaces.  ``ridge`` marks a regularised solve."""

    index: tuple
    coeffs: np.ndarray
    ridge: bool = False
    n_points: int = 0


@dataclass
class FitStats:
    method: str
    seconds: float = 0.0
    n_local_systems: int = 0
    mean_points_per_system: float = 0.0
    ridge_count: int = 0
    rank_deficient: bool = False

    def as_dict(self, timings=True):
        d = {
            "method": self.method,
            "n_local_systems": self.n_local_systems,
            "mean_points_per_system": self.mean_points_per_system,
            "ridge_count": self.ridge_count,
            "rank_deficient": self.rank_deficient,
        }
        if timings:
            d["seconds"] = self.seconds
        return d


@dataclass
class ControlMesh:
    """``(a, b, dim)`` grid of control points over two open cubic knot vectors."""

    grid: np.ndarray
    u: BasisContext
    v: BasisContext
    stats: FitStats | None = field(default=None, compare=False)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        if self.grid.ndim == 2:
            self.grid = self.grid[:, :, None]
        if self.grid.shape[:2] != (self.u.n_basis, self.v.n_basis):
            raise ValueError(
                f"grid {self.grid.shape[:2]} does not match knots ({self.u.n_basis}, {self.v.n_basis})"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape[0], self.grid.shape[1]

    def __call__(self, u, v):
        return evaluate_surface(self, u, v)

    def to_dict(self) -> dict:
        a, b = self.shape
        return {
            "degree": DEGREE,
            "rows": a,
            "cols": b,
            "dim": int(self.grid.shape[2]),
            "u_knots": self.u.knots.tolist(),
            "v_knots": self.v.knots.tolist(),
            "control_points": self.grid.reshape(a * b, -1).tolist(),
        }

    def to_json(self, path=None, **kw):
        text = json.dumps(self.to_dict(), **kw)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_dict(cls, d) -> "ControlMesh":
        u = BasisContext(d["u_knots"], strict=False)
        v = BasisContext(d["v_knots"], strict=False)
        grid = np.array(d["control_points"], dtype=float).reshape(d["rows"], d["cols"], -1)
        return cls(grid, u, v)

    @classmethod
    def from_json(cls, text_or_path) -> "ControlMesh":
        text = str(text_or_path)
        if not text.lstrip().startswith("{"):
            with open(text_or_path) as fh:
                text = fh.read()
        return cls.from_dict(json.loads(text))

    def tessellate(self, n_u=50, n_v=None) -> TriMesh:
        """Sample the surface on a regular ``n_u x n_v`` parameter grid."""
        from .synthetic import grid_mesh

        n_v = n_u if n_v is None else n_v
        (u0, u1), (v0, v1) = self.u.domain, self.v.domain
        uv, tris = grid_mesh(n_u, n_v, u0, u1, v0, v1)
        pts = evaluate_surface(self, uv[:, 0], uv[:, 1])
        if pts.shape[1] != 3:
            pts = np.column_stack([uv[:, :2], pts[:, :1]])
        return TriMesh(pts, tris, validate=False)


def eval_basis(ctx: BasisContext, t):
    """Knot span of ``t`` and the four non-zero basis values ``N_{s-3..s}(t)``.

    :raises ValueError: if ``t`` is outside the parameter domain
    """
    ctx.check_domain(t)
    span = int(ctx.find_span(float(t)))
    return span, ctx.basis_funs(span, float(t))


def basis_matrix(ctx: BasisContext, t):
    """Vectorised :func:`eval_basis`: ``(spans, values)`` of shapes ``(N,)`` and ``(N, 4)``."""
    t = np.asarray(t, dtype=float)
    ctx.check_domain(t)
    spans = ctx.find_span(t)
    return spans, ctx.basis_funs(spans, t)


def window_weight(t, t_lo, t_hi, lower_width, upper_width):
    """1 on ``[t_lo, t_hi]``, gaussian falloff outside.

    Below the interval the weight is ``exp(-(t - t_lo)^2 / (lower_width^2 / 4))``
    and symmetrically above it with ``upper_width``.
    """
    t = np.asarray(t, dtype=float)
    w = np.ones_like(t)
    below = t < t_lo
    above = t > t_hi
    w[below] = np.exp(-((t[below] - t_lo) ** 2) / (lower_width ** 2 / 4.0))
    w[above] = np.exp(-((t[above] - t_hi) ** 2) / (upper_width ** 2 / 4.0))
    return w


def _patch_window(ctx: BasisContext, p, t, mode):
    lo, hi = ctx.patch_interval(p)
    if mode == "truncated":
        return ((t >= lo) & (t <= hi)).astype(float)
    if mode != "gaussian":
        raise ValueError(f"unknown window mode {mode!r}")
    width = hi - lo
    lw = lo - ctx.knots[p + DEGREE - 1] if p > 0 else width
    uw = ctx.knots[p + DEGREE + 2] - hi if p < ctx.n_patches - 1 else width
    return window_weight(t, lo, hi, lw, uw)


def _patch_of(ctx: BasisContext, t):
    return ctx.find_span(t) - DEGREE


def fit_local_patch_curve(p, t, f, ctx: BasisContext, window="gaussian") -> LocalPatchFit:
    """Windowed LSQ fit of the four basis polynomials of patch ``p``.

    Data are taken from patch ``p`` and its two neighbours where the window
    exceeds ``1e-4``.
    """
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    f2 = f[:, None] if f.ndim == 1 else f
    near = np.abs(_patch_of(ctx, t) - p) <= 1
    w = _patch_window(ctx, p, t, window)
    sel = near & (w > GATHER_CUTOFF)
    B = ctx.basis_funs(p + DEGREE, t[sel])
    coef, ridge = weighted_lstsq(B, f2[sel], w[sel], LOCAL_RIDGE)
    if f.ndim == 1:
        coef = coef[:, 0]
    return LocalPatchFit((p,), coef, ridge, int(sel.sum()))


def fit_local_patch_surface(p, q, uv, points, ctx_u: BasisContext, ctx_v: BasisContext,
                            window="gaussian", subset=None) -> LocalPatchFit:
    """Windowed LSQ fit of the 16 tensor basis polynomials of patch ``(p, q)``.

    ``subset`` optionally restricts the candidate data indices (the blended
    driver passes the points of the 3x3 block of adjoining patches).
    """
    uv = np.asarray(uv, dtype=float)
    P = np.asarray(points, dtype=float)
    P2 = P[:, None] if P.ndim == 1 else P
    if subset is None:
        pu = _patch_of(ctx_u, uv[:, 0])
        pv = _patch_of(ctx_v, uv[:, 1])
        subset = np.flatnonzero((np.abs(pu - p) <= 1) & (np.abs(pv - q) <= 1))
    u = uv[subset, 0]
    v = uv[subset, 1]
    w = _patch_window(ctx_u, p, u, window) * _patch_window(ctx_v, q, v, window)
    keep = w > GATHER_CUTOFF
    u, v, w = u[keep], v[keep], w[keep]
    Bu = ctx_u.basis_funs(p + DEGREE, u)
    Bv = ctx_v.basis_funs(q + DEGREE, v)
    A = (Bu[:, :, None] * Bv[:, None, :]).reshape(len(u), 16)
    coef, ridge = weighted_lstsq(A, P2[subset[keep]], w, LOCAL_RIDGE)
    coef = coef.reshape(4, 4, -1)
    if P.ndim == 1:
        coef = coef[:, :, 0]
    return LocalPatchFit((p, q), coef, ridge, int(keep.sum()))


def _slot_sources(i, n_p, weights: BlendWeights):
    """``[(patch, local index, weight)]`` feeding global coefficient ``i``."""
    if n_p == 1:
        return [(0, i, 1.0)]
    if i <= 1:
        return [(0, i, 1.0)]
    if i >= n_p + 1:
        return [(n_p - 1, i - (n_p - 1), 1.0)]
    cand = [(i - 3, 3, weights.r0), (i - 2, 2, weights.r1), (i - 1, 1, weights.r2), (i, 0, weights.r3)]
    cand = [(p, j, w) for p, j, w in cand if 0 <= p < n_p and w != 0]
    total = sum(w for _, _, w in cand)
    return [(p, j, w / total) for p, j, w in cand]


def blend_curve(locals_, n_p=None, weights: BlendWeights | None = None):
    """Global coefficients ``G_0 .. G_{n_p+2}`` from per-patch local fits.

    With the default weights interior coefficients average the two central
    local coefficients, ``G_i = (L_2^{i-2} + L_1^{i-1}) / 2``; the first
    two and last two are copied from the end patches.
    """
    weights = weights or BlendWeights()
    n_p = len(locals_) if n_p is None else n_p
    L = [np.asarray(lf.coeffs if isinstance(lf, LocalPatchFit) else lf, dtype=float) for lf in locals_]
    G = []
    for i in range(n_p + 3):
        G.append(sum(w * L[p][j] for p, j, w in _slot_sources(i, n_p, weights)))
    return np.array(G)


def blend_surface(locals_grid, ctx_u: BasisContext, ctx_v: BasisContext,
                  weights: BlendWeights | None = None) -> ControlMesh:
    """Average coincident local control points into the global mesh.

    Interior slots take four patches, edge slots two and corner slots one,
    following the curve rule in each direction.
    """
    weights = weights or BlendWeights()
    npu, npv = ctx_u.n_patches, ctx_v.n_patches
    L = [[np.asarray(lf.coeffs if isinstance(lf, LocalPatchFit) else lf, dtype=float) for lf in row]
         for row in locals_grid]
    if len(L) != npu or any(len(row) != npv for row in L):
        raise ValueError("need one local fit per patch")
    a, b = npu + 3, npv + 3
    tail = L[0][0].shape[2:]
    grid = np.zeros((a, b) + tail)
    src_u = [_slot_sources(i, npu, weights) for i in range(a)]
    src_v = [_slot_sources(j, npv, weights) for j in range(b)]
    for i in range(a):
        for j in range(b):
            acc = 0.0
            for p, li, wu in src_u[i]:
                for q, lj, wv in src_v[j]:
                    acc = acc + wu * wv * L[p][q][li, lj]
            grid[i, j] = acc
    return ControlMesh(grid, ctx_u, ctx_v)


def _bucket(pu, pv, npu, npv):
    cell = pu * npv + pv
    order = np.argsort(cell, kind="stable")
    starts = np.searchsorted(cell[order], np.arange(npu * npv + 1))
    return order, starts


def fit_blended_surface(uv, points, layout: KnotLayout, window="gaussian",
                        weights: BlendWeights | None = None) -> ControlMesh:
    """Blending-local-fits surface over ``layout``.

    One 16-unknown system is solved per patch, using data of the patch and
    its (up to eight) adjoining patches, so the cost is linear in the
    number of points for a fixed window.
    """
    t0 = time.perf_counter()
    uv = np.asarray(uv, dtype=float)
    P = np.asarray(points, dtype=float)
    cu, cv = BasisContext(layout.u_knots), BasisContext(layout.v_knots)
    cu.check_domain(uv[:, 0])
    cv.check_domain(uv[:, 1])
    npu, npv = cu.n_patches, cv.n_patches
    pu, pv = _patch_of(cu, uv[:, 0]), _patch_of(cv, uv[:, 1])
    order, starts = _bucket(pu, pv, npu, npv)

    grid_fits = []
    n_pts = []
    ridge = 0
    for p in range(npu):
        row = []
        for q in range(npv):
            cells = [(pp, qq) for pp in range(max(p - 1, 0), min(p + 2, npu))
                     for qq in range(max(q - 1, 0), min(q + 2, npv))]
            subset = np.concatenate([order[starts[c * npv + d]:starts[c * npv + d + 1]] for c, d in cells])
            subset.sort()
            lf = fit_local_patch_surface(p, q, uv, P, cu, cv, window, subset=subset)
            ridge += lf.ridge
            n_pts.append(lf.n_points)
            row.append(lf)
        grid_fits.append(row)
    cm = blend_surface(grid_fits, cu, cv, weights)
    cm.stats = FitStats("blended", time.perf_counter() - t0, npu * npv, float(np.mean(n_pts)), ridge)
    return cm


def fit_blended_curve(t, f, knots, window="gaussian", weights: BlendWeights | None = None):
    """Curve analogue of :func:`fit_blended_surface`; returns ``(ctx, coefficients)``."""
    ctx = BasisContext(knots)
    ctx.check_domain(t)
    fits = [fit_local_patch_curve(p, t, f, ctx, window) for p in range(ctx.n_patches)]
    return ctx, blend_curve(fits, ctx.n_patches, weights)


def _svd_solve(A, B):
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    m = A.shape[1]
    tol = s[0] * max(A.shape) * np.finfo(float).eps if len(s) else 0.0
    rank = int((s > tol).sum())
    UtB = U.T @ B
    if rank == m:
        return Vt.T @ (UtB / s[:, None]), False
    lam = LOCAL_RIDGE * float((s ** 2).sum())
    return Vt.T @ (UtB * (s / (s ** 2 + lam))[:, None]), True


def global_lsq_curve(t, f, knots):
    """Unweighted global least-squares curve coefficients (SVD)."""
    ctx = BasisContext(knots, strict=False)
    t = np.asarray(t, dtype=float)
    spans, N = basis_matrix(ctx, t)
    A = np.zeros((len(t), ctx.n_basis))
    rows = np.arange(len(t))
    for k in range(4):
        A[rows, spans - DEGREE + k] = N[:, k]
    f = np.asarray(f, dtype=float)
    coef, _ = _svd_solve(A, f[:, None] if f.ndim == 1 else f)
    return coef[:, 0] if f.ndim == 1 else coef


def surface_design_matrix(uv, cu: BasisContext, cv: BasisContext):
    """Dense ``(N, a*b)`` collocation matrix, column ``i*b + j`` for ``N_i(u) N_j(v)``."""
    su, Nu = basis_matrix(cu, uv[:, 0])
    sv, Nv = basis_matrix(cv, uv[:, 1])
    a, b = cu.n_basis, cv.n_basis
    A = np.zeros((len(uv), a * b))
    rows = np.arange(len(uv))
    for i in range(4):
        for j in range(4):
            A[rows, (su - DEGREE + i) * b + (sv - DEGREE + j)] = Nu[:, i] * Nv[:, j]
    return A


def global_lsq_fit(uv, points, layout: KnotLayout) -> ControlMesh:
    """Control mesh minimising the unweighted squared residual, via SVD.

    Rank-deficient problems (e.g. a knot span without data) get a small
    ridge and ``stats.rank_deficient`` is set.
    """
    t0 = time.perf_counter()
    uv = np.asarray(uv, dtype=float)
    P = np.asarray(points, dtype=float)
    P2 = P[:, None] if P.ndim == 1 else P
    cu = BasisContext(layout.u_knots, strict=False)
    cv = BasisContext(layout.v_knots, strict=False)
    A = surface_design_matrix(uv, cu, cv)
    coef, deficient = _svd_solve(A, P2)
    grid = coef.reshape(cu.n_basis, cv.n_basis, -1)
    cm = ControlMesh(grid, cu, cv)
    cm.stats = FitStats("global", time.perf_counter() - t0, 1, float(len(uv)), int(deficient), deficient)
    return cm


def evaluate_curve(ctx: BasisContext, coeffs, t):
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    spans, N = basis_matrix(ctx, np.atleast_1d(t))
    C = np.asarray(coeffs, dtype=float)
    idx = spans[:, None] - DEGREE + np.arange(4)
    out = np.einsum("nk,nk...->n...", N, C[idx])
    return out[0] if scalar else out


def evaluate_surface(mesh: ControlMesh, u, v):
    """``sum_ij G_ij N_i(u) N_j(v)`` over the 4x4 non-zero stencil.

    Scalars give a single point, arrays a ``(N, dim)`` array.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    scalar = u.ndim == 0 and v.ndim == 0
    u, v = np.broadcast_arrays(np.atleast_1d(u), np.atleast_1d(v))
    su, Nu = basis_matrix(mesh.u, u.ravel())
    sv, Nv = basis_matrix(mesh.v, v.ravel())
    iu = su[:, None] - DEGREE + np.arange(4)
    iv = sv[:, None] - DEGREE + np.arange(4)
    G = mesh.grid[iu[:, :, None], iv[:, None, :]]
    out = np.einsum("ni,nj,nijd->nd", Nu, Nv, G)
    return out[0] if scalar else out


def fit_error(mesh: ControlMesh, uv, points) -> float:
    """Mean Euclidean distance between data and the surface at the data's ``uv``."""
    uv = np.asarray(uv, dtype=float)
    P = np.asarray(points, dtype=float)
    if len(uv) == 0:
        return 0.0
    S = evaluate_surface(mesh, uv[:, 0], uv[:, 1])
    P2 = P[:, None] if P.ndim == 1 else P
    return float(np.linalg.norm(S - P2, axis=1).mean())
