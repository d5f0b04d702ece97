"""End-to-end driver: smoothing, hole filling, parameterization, knots, fitting."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import bspline
from .holefill import FillParams, fill_holes
from .knots import decompose, layout_knots, uniform_layout
from .mesh import load_mesh, save_obj
from .mls import MlsConfig
from .parameterize import parameterize
from .smoothing import CornerSpec, smooth_boundary, smooth_surface
from .synthetic import KINDS, generate_synthetic

__all__ = ["PipelineConfig", "ConfigError", "PipelineError", "RunReport", "StageRecord",
           "run_pipeline", "benchmark_fitters", "format_benchmark"]

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


class PipelineError(RuntimeError):
    """A stage failed; ``report`` holds everything up to and including the failure."""

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


def _opt_float(s):
    return None if s.lower() in ("", "none", "auto") else float(s)


def _opt_int(s):
    return None if s.lower() in ("", "none", "auto") else int(s)


def _opt_str(s):
    return None if s.lower() in ("", "none") else s


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _int_list(s):
    s = s.strip()
    if s.lower() in ("", "none", "auto"):
        return None
    return [int(x) for x in s.replace(",", " ").split()]


@dataclass
class PipelineConfig:
    """All tunables of a run.

    Either ``input`` (an OBJ/PLY path) or ``synthetic`` (a kind from
    :data:`blendspline.synthetic.KINDS`) supplies the mesh.  ``phi`` is in
    degrees.  ``kappa=None`` means ``kappa_rel`` times the bounding-box
    diagonal of the parameterized mesh.
    """

    input: str | None = None
    format: str | None = None
    synthetic: str | None = None
    synthetic_n: int = 2500
    synthetic_noise: float = 0.0
    synthetic_holes: int = 0
    seed: int = 0
    corners: list | None = None

    k_neighbors: int = 15
    h: float | None = None
    radius: float | None = None
    max_iterations: int = 100
    convergence_tol: float | None = None
    smoothing_passes: int = 1
    skip_smoothing: bool = False
    skip_boundary_smoothing: bool = False

    skip_hole_fill: bool = False
    phi: float = 100.0
    fill_edge_length: float | None = None
    max_front_iterations: int | None = None
    d_rule: str = "isosceles"

    knot_mode: str = "adaptive"
    kappa: float | None = None
    kappa_rel: float = 0.005
    max_depth: int = 5
    uniform_patches: int = 10

    window: str = "gaussian"
    fitter: str = "both"

    output_dir: str | None = None
    dump_intermediate: str | None = None
    tessellation: int = 50

    _PARSERS = {
        "input": _opt_str, "format": _opt_str, "synthetic": _opt_str, "corners": _int_list,
        "h": _opt_float, "radius": _opt_float, "convergence_tol": _opt_float,
        "fill_edge_length": _opt_float, "max_front_iterations": _opt_int, "kappa": _opt_float,
        "output_dir": _opt_str, "dump_intermediate": _opt_str,
    }

    def __post_init__(self):
        self.validate()

    def validate(self):
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need((self.input is None) != (self.synthetic is None), "set exactly one of 'input' and 'synthetic'")
        need(self.format in (None, "obj", "ply"), "format must be obj or ply")
        need(self.synthetic is None or self.synthetic in KINDS, f"synthetic must be one of {KINDS}")
        need(self.synthetic_n >= 4, "synthetic_n must be >= 4")
        need(self.synthetic_noise >= 0, "synthetic_noise must be >= 0")
        need(self.synthetic_holes >= 0, "synthetic_holes must be >= 0")
        need(self.corners is None or len(self.corners) == 4, "corners needs exactly 4 vertex indices")
        need(self.k_neighbors >= 3, "k_neighbors must be >= 3")
        need(self.h is None or self.h > 0, "h must be > 0")
        need(self.radius is None or self.radius > 0, "radius must be > 0")
        need(self.max_iterations >= 1, "max_iterations must be >= 1")
        need(self.convergence_tol is None or self.convergence_tol > 0, "convergence_tol must be > 0")
        need(self.smoothing_passes >= 1, "smoothing_passes must be >= 1")
        need(0 <= self.phi < 180, "phi must lie in [0, 180) degrees")
        need(self.fill_edge_length is None or self.fill_edge_length > 0, "fill_edge_length must be > 0")
        need(self.max_front_iterations is None or self.max_front_iterations >= 1,
             "max_front_iterations must be >= 1")
        need(self.d_rule in ("isosceles", "equilateral"), "d_rule must be isosceles or equilateral")
        need(self.knot_mode in ("adaptive", "uniform"), "knot_mode must be adaptive or uniform")
        need(self.kappa is None or self.kappa >= 0, "kappa must be >= 0")
        need(self.kappa_rel >= 0, "kappa_rel must be >= 0")
        need(0 <= self.max_depth <= 12, "max_depth must lie in [0, 12]")
        need(self.uniform_patches >= 1, "uniform_patches must be >= 1")
        need(self.window in ("gaussian", "truncated"), "window must be gaussian or truncated")
        need(self.fitter in ("blended", "global", "both"), "fitter must be blended, global or both")
        need(self.tessellation >= 2, "tessellation must be >= 2")

    @classmethod
    def keys(cls):
        return [f.name for f in fields(cls)]

    @classmethod
    def _convert(cls, key, raw):
        types = {f.name: f.type for f in fields(cls)}
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}")
        if key in cls._PARSERS:
            conv = cls._PARSERS[key]
        else:
            conv = {"int": int, "float": float, "bool": _bool, "str": str}[types[key]]
        try:
            return conv(raw.strip())
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from None

    @classmethod
    def parse(cls, text: str, overrides: dict | None = None) -> "PipelineConfig":
        """Read ``key = value`` lines (``#`` starts a comment)."""
        values = {}
        for n, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {n}: expected key = value")
            key, raw = (s.strip() for s in line.split("=", 1))
            if key in values:
                raise ConfigError(f"line {n}: duplicate key {key!r}")
            values[key] = cls._convert(key, raw)
        for key, val in (overrides or {}).items():
            if key not in cls.keys():
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = cls._convert(key, val) if isinstance(val, str) else val
        return cls(**values)

    @classmethod
    def from_file(cls, path, overrides=None) -> "PipelineConfig":
        path = Path(path)
        cfg = cls.parse(path.read_text(), overrides)
        if cfg.input is not None and not Path(cfg.input).is_absolute():
            cfg.input = str(path.parent / cfg.input)
        return cfg

    def mls(self) -> MlsConfig:
        return MlsConfig(h=self.h, k=self.k_neighbors, radius=self.radius,
                         max_iterations=self.max_iterations, convergence_tol=self.convergence_tol)

    def fill(self) -> FillParams:
        return FillParams(phi=math.radians(self.phi), a=self.fill_edge_length,
                          max_front_iterations=self.max_front_iterations, d_rule=self.d_rule)


@dataclass
class StageRecord:
    name: str
    seconds: float = 0.0
    vertices_in: int = 0
    triangles_in: int = 0
    vertices_out: int = 0
    triangles_out: int = 0
    skipped: bool = False
    details: dict = field(default_factory=dict)
    error: str | None = None


class _Collector(logging.Handler):
    def __init__(self):
        super().__init__(logging.WARNING)
        self.messages = []

    def emit(self, record):
        self.messages.append(f"{record.name}: {record.getMessage()}")


@dataclass
class RunReport:
    stages: list = field(default_factory=list)
    u_knots: list = field(default_factory=list)
    v_knots: list = field(default_factory=list)
    n_p_u: int = 0
    n_p_v: int = 0
    fits: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    error: str | None = None
    outputs: dict = field(default_factory=dict)

    def to_dict(self, timings=True) -> dict:
        d = asdict(self)
        if not timings:
            for s in d["stages"]:
                s.pop("seconds")
            for f in d["fits"].values():
                f.pop("seconds", None)
        return d

    def to_json(self, timings=True) -> str:
        return json.dumps(self.to_dict(timings), indent=2, sort_keys=True)

    def to_text(self) -> str:
        lines = ["stage               time(s)   verts in/out     tris in/out"]
        for s in self.stages:
            tag = " (skipped)" if s.skipped else ""
            lines.append(f"{s.name:<18} {s.seconds:8.3f}   {s.vertices_in:6d}/{s.vertices_out:<6d}"
                         f"   {s.triangles_in:6d}/{s.triangles_out:<6d}{tag}")
            for k, v in s.details.items():
                lines.append(f"    {k}: {v}")
            if s.error:
                lines.append(f"    error: {s.error}")
        if self.u_knots:
            lines.append(f"patches: {self.n_p_u} x {self.n_p_v}  "
                         f"(control mesh {self.n_p_u + 3} x {self.n_p_v + 3})")
            lines.append(f"u knots: {self.u_knots}")
            lines.append(f"v knots: {self.v_knots}")
        for name, f in self.fits.items():
            lines.append(f"{name}: error/point {f['fit_error']:.6g}, {f['seconds']:.3f} s, "
                         f"{f['n_local_systems']} systems, {f['mean_points_per_system']:.1f} points/system"
                         + (", rank deficient" if f["rank_deficient"] else "")
                         + (f", {f['ridge_count']} ridge solves" if f["ridge_count"] else ""))
        if self.warnings:
            lines.append(f"warnings ({len(self.warnings)}):")
            lines.extend(f"  {w}" for w in self.warnings)
        if self.error:
            lines.append(f"error: {self.error}")
        return "\n".join(lines)


def _load(cfg: PipelineConfig):
    if cfg.synthetic is not None:
        s = generate_synthetic(cfg.synthetic, cfg.synthetic_n, cfg.synthetic_noise, cfg.seed,
                               cfg.synthetic_holes)
        return s.mesh, (cfg.corners or s.corners or None)
    return load_mesh(cfg.input, cfg.format), cfg.corners


def run_pipeline(cfg: PipelineConfig):
    """Run every stage in order and return ``(report, control_meshes)``.

    ``control_meshes`` maps fitter name to :class:`~blendspline.bspline.ControlMesh`.
    Outputs go to ``cfg.output_dir`` when set.

    :raises PipelineError: when a stage fails; ``exc.report`` is the partial report
    """
    report = RunReport()
    meshes: dict = {}
    handler = _Collector()
    pkg_log = logging.getLogger("blendspline")
    pkg_log.addHandler(handler)
    dump = Path(cfg.dump_intermediate) if cfg.dump_intermediate else None
    if dump:
        dump.mkdir(parents=True, exist_ok=True)
    state: dict = {}

    def stage(name, fn, skip=False):
        mesh_in = state.get("mesh")
        rec = StageRecord(name, skipped=skip)
        if mesh_in is not None:
            rec.vertices_in, rec.triangles_in = mesh_in.n_vertices, mesh_in.n_triangles
        t0 = time.perf_counter()
        try:
            if not skip:
                fn(rec)
        except Exception as exc:
            rec.error = f"{type(exc).__name__}: {exc}"
            rec.seconds = time.perf_counter() - t0
            report.stages.append(rec)
            report.error = f"{name}: {rec.error}"
            report.warnings = list(handler.messages)
            raise PipelineError(report.error, report) from exc
        rec.seconds = time.perf_counter() - t0
        mesh_out = state.get("mesh")
        if mesh_out is not None:
            rec.vertices_out, rec.triangles_out = mesh_out.n_vertices, mesh_out.n_triangles
        report.stages.append(rec)
        if dump and mesh_out is not None and not skip and name in ("smoothing", "hole_fill"):
            save_obj(mesh_out, dump / f"{name}.obj")

    def do_load(rec):
        state["mesh"], state["corners"] = _load(cfg)
        m = state["mesh"]
        rec.details["boundary_loops"] = len(m.boundary_loops)
        rec.details["bbox_diagonal"] = m.bbox_diagonal()

    def do_smooth(rec):
        mls = cfg.mls()
        m = smooth_surface(state["mesh"], mls, passes=cfg.smoothing_passes)
        if not cfg.skip_boundary_smoothing:
            corners = CornerSpec(tuple(state["corners"] or ()))
            m = smooth_boundary(m, corners, mls)
        rec.details["boundary_smoothed"] = not cfg.skip_boundary_smoothing
        state["mesh"] = m

    def do_fill(rec):
        before = len(state["mesh"].boundary_loops)
        state["mesh"] = fill_holes(state["mesh"], cfg.fill(), cfg.mls())
        rec.details["holes_filled"] = before - len(state["mesh"].boundary_loops)

    def do_param(rec):
        par = parameterize(state["mesh"], state["corners"])
        state["uv"] = par.uv
        rec.details["corners"] = [int(c) for c in par.corner_indices]
        rec.details["residual"] = par.residual
        if dump:
            save_obj(state["mesh"], dump / "parameterized.obj", uv=par.uv)

    def do_knots(rec):
        pts = state["mesh"].vertices
        if cfg.knot_mode == "uniform":
            layout = uniform_layout(cfg.uniform_patches)
        else:
            kappa = cfg.kappa if cfg.kappa is not None else cfg.kappa_rel * state["mesh"].bbox_diagonal()
            tree = decompose(state["uv"], pts, kappa, cfg.max_depth)
            layout = layout_knots(tree)
            rec.details["kappa"] = kappa
            rec.details["leaves"] = sum(1 for _ in tree.leaves())
        state["layout"] = layout
        report.u_knots = layout.u_knots.tolist()
        report.v_knots = layout.v_knots.tolist()
        report.n_p_u, report.n_p_v = layout.n_p_u, layout.n_p_v

    def do_fit(rec):
        uv, pts, layout = state["uv"], state["mesh"].vertices, state["layout"]
        names = ["blended", "global"] if cfg.fitter == "both" else [cfg.fitter]
        for name in names:
            if name == "blended":
                cm = bspline.fit_blended_surface(uv, pts, layout, window=cfg.window)
            else:
                cm = bspline.global_lsq_fit(uv, pts, layout)
            meshes[name] = cm
            entry = cm.stats.as_dict()
            entry["fit_error"] = bspline.fit_error(cm, uv, pts)
            report.fits[name] = entry
        rec.details["fitters"] = names

    try:
        stage("load", do_load)
        stage("smoothing", do_smooth, skip=cfg.skip_smoothing)
        stage("hole_fill", do_fill, skip=cfg.skip_hole_fill)
        stage("parameterization", do_param)
        stage("knot_selection", do_knots)
        stage("fitting", do_fit)
        report.warnings = list(handler.messages)
        if cfg.output_dir:
            _write_outputs(cfg, report, meshes)
    finally:
        pkg_log.removeHandler(handler)
    return report, meshes


def _write_outputs(cfg, report, meshes):
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, cm in meshes.items():
        cm.to_json(out / f"control_mesh_{name}.json", indent=1)
        save_obj(cm.tessellate(cfg.tessellation), out / f"surface_{name}.obj")
        report.outputs[name] = str(out / f"control_mesh_{name}.json")
    (out / "report.json").write_text(report.to_json())
    (out / "report.txt").write_text(report.to_text() + "\n")


def benchmark_fitters(sizes=(2500, 5000, 10000), mesh_sizes=(13,), repetitions=3, seed=0,
                      window="gaussian"):
    """Median wall time of each fitter per ``(points, control-mesh size)``.

    Data are noise-free sincos samples with ``uv`` equal to ``xy``; a mesh
    size ``m`` means an ``m x m`` control mesh on uniform knots.
    """
    rows = []
    if repetitions <= 0:
        return rows
    for n in sizes:
        s = generate_synthetic("sincos", n, seed=seed)
        uv, pts = s.mesh.vertices[:, :2].copy(), s.mesh.vertices
        for m in mesh_sizes:
            if m < 4:
                raise ValueError("control mesh size must be >= 4")
            layout = uniform_layout(m - 3)
            for name in ("blended", "global"):
                times = []
                for _ in range(repetitions):
                    t0 = time.perf_counter()
                    if name == "blended":
                        bspline.fit_blended_surface(uv, pts, layout, window=window)
                    else:
                        bspline.global_lsq_fit(uv, pts, layout)
                    times.append(time.perf_counter() - t0)
                rows.append({"fitter": name, "n_points": len(pts), "mesh": m,
                             "median_seconds": float(np.median(times))})
    return rows


def format_benchmark(rows) -> str:
    lines = ["fitter    points   mesh   median(s)"]
    for r in rows:
        lines.append(f"{r['fitter']:<8} {r['n_points']:7d}  {r['mesh']:3d}x{r['mesh']:<3d} {r['median_seconds']:9.4f}")
    return "\n".join(lines)

