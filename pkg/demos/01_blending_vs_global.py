"""How close does blending local fits get to the global least-squares surface?

We sample z = sin(2 pi x) cos(2 pi y) on 2500 points and fit a 13 x 13
control mesh two ways.  The global fitter solves one dense least-squares
problem over every control point.  The blended fitter solves a small
16-unknown problem per patch and averages the coefficients that
neighbouring patches share.

The answer depends a lot on the parameterization.  When uv comes from the
full pipeline (mean value coordinates over the smoothed mesh), the blended
error sits a few percent above the global optimum.  On raw xy with the
same knots the gap is much larger, because the oscillating surface makes
each local fit's extrapolation into its neighbours' spans disagree.

Run:  python demos/01_blending_vs_global.py
"""

import time

import numpy as np

from blendspline import bspline
from blendspline.knots import uniform_layout
from blendspline.pipeline import PipelineConfig, run_pipeline
from blendspline.synthetic import generate_synthetic


def raw_xy(window):
    s = generate_synthetic("sincos", 2500)
    uv, pts = s.mesh.vertices[:, :2].copy(), s.mesh.vertices
    layout = uniform_layout(10)
    t0 = time.perf_counter()
    eb = bspline.fit_error(bspline.fit_blended_surface(uv, pts, layout, window=window), uv, pts)
    tb = time.perf_counter() - t0
    t0 = time.perf_counter()
    eg = bspline.fit_error(bspline.global_lsq_fit(uv, pts, layout), uv, pts)
    tg = time.perf_counter() - t0
    return eb, eg, tb, tg


def through_pipeline(window, noise):
    cfg = PipelineConfig(synthetic="sincos", synthetic_n=2500, synthetic_noise=noise,
                         knot_mode="uniform", uniform_patches=10, window=window)
    report, _ = run_pipeline(cfg)
    f = report.fits
    return f["blended"]["fit_error"], f["global"]["fit_error"], f["blended"]["seconds"], f["global"]["seconds"]


def main():
    print(__doc__.split("\n\n")[0])
    print()
    print(f"{'uv source':<22}{'window':<11}{'noise':>7}{'blended':>11}{'global':>11}{'ratio':>8}"
          f"{'t_blend':>9}{'t_glob':>9}")
    rows = [("raw xy", w, 0.0, raw_xy(w)) for w in ("gaussian", "truncated")]
    rows += [("pipeline (MVC)", w, n, through_pipeline(w, n))
             for w, n in (("gaussian", 0.0), ("gaussian", 0.005), ("truncated", 0.0))]
    for src, w, n, (eb, eg, tb, tg) in rows:
        print(f"{src:<22}{w:<11}{n:>7.3f}{eb:>11.5f}{eg:>11.5f}{eb / eg:>8.2f}{tb:>9.3f}{tg:>9.3f}")
    print()
    print("The global fit always wins on error (it is the L2 optimum).  With the gaussian")
    print("window and pipeline uv the blended fit stays within a few percent of it.  The")
    print("truncated window does well on raw xy but poorly on pipeline uv, where the")
    print("points are spread unevenly and some patches see too few of them.")


if __name__ == "__main__":
    np.set_printoptions(precision=4)
    main()
