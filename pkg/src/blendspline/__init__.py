"""Cubic B-spline surfaces from noisy, holey triangle meshes by blending local fits."""

from .bspline import (BasisContext, BlendWeights, ControlMesh, LocalPatchFit, blend_curve, blend_surface,
                      eval_basis, evaluate_surface, fit_blended_curve, fit_blended_surface, fit_error,
                      fit_local_patch_curve, fit_local_patch_surface, global_lsq_curve, global_lsq_fit,
                      window_weight)
from .holefill import FillParams, HoleFillError, fill_holes
from .knots import KnotLayout, decompose, layout_knots, uniform_layout
from .mesh import MeshError, SpatialIndex, TriMesh, load_mesh, save_obj, save_ply
from .mls import MlsConfig, MlsError, project_point
from .parameterize import ParameterizationError, parameterize
from .pipeline import PipelineConfig, RunReport, benchmark_fitters, run_pipeline
from .smoothing import CornerSpec, smooth_boundary, smooth_surface
from .synthetic import generate_synthetic

__version__ = "0.1.0"

__all__ = [
    "BasisContext", "BlendWeights", "ControlMesh", "LocalPatchFit", "blend_curve", "blend_surface",
    "eval_basis", "evaluate_surface", "fit_blended_curve", "fit_blended_surface", "fit_error",
    "fit_local_patch_curve", "fit_local_patch_surface", "global_lsq_curve", "global_lsq_fit",
    "window_weight", "FillParams", "HoleFillError", "fill_holes", "KnotLayout", "decompose",
    "layout_knots", "uniform_layout", "MeshError", "SpatialIndex", "TriMesh", "load_mesh", "save_obj",
    "save_ply", "MlsConfig", "MlsError", "project_point", "ParameterizationError", "parameterize",
    "PipelineConfig", "RunReport", "benchmark_fitters", "run_pipeline", "CornerSpec", "smooth_boundary",
    "smooth_surface", "generate_synthetic",
]
