"""A full run at 8100 points, and how the two fitters scale.

Part one pushes a noisy bicubic sheet with one hole through every stage:
smoothing, hole filling, parameterization, knot selection and fitting on a
13 x 13 control mesh.  The stage report shows where the time goes.
Hole filling dominates, because every candidate vertex needs an MLS
projection.

Part two times the two fitters alone.  Doubling the data roughly doubles
the blended fitter's time.  Doubling the control mesh in each direction
hurts the global fitter far more than the blended one, because its dense
system grows with the square of the number of control points.

Run:  python demos/03_full_scale_run.py
"""

from blendspline.pipeline import PipelineConfig, benchmark_fitters, format_benchmark, run_pipeline


def main():
    print(__doc__.split("\n\n")[0])
    print()
    cfg = PipelineConfig(synthetic="bicubic", synthetic_n=8100, synthetic_noise=0.005, synthetic_holes=1,
                         knot_mode="uniform", uniform_patches=10)
    report, meshes = run_pipeline(cfg)
    text = report.to_text().splitlines()
    print("\n".join(line for line in text if not line.startswith("  ") and "knots:" not in line))
    print(f"control mesh: {meshes['blended'].shape}")
    print()
    rows = benchmark_fitters(sizes=(2500, 5000, 10000), mesh_sizes=(13, 26), repetitions=3)
    print(format_benchmark(rows))


if __name__ == "__main__":
    main()
