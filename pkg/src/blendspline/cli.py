"""Command line entry point: ``blendspline fit <config>``."""

from __future__ import annotations

import argparse
import logging
import sys

from .pipeline import ConfigError, PipelineConfig, PipelineError, run_pipeline

_OVERRIDES = {
    "phi": "phi",
    "kappa": "kappa",
    "max_depth": "max_depth",
    "k_neighbors": "k_neighbors",
    "window": "window",
    "fitter": "fitter",
    "dump_intermediate": "dump_intermediate",
    "seed": "seed",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blendspline",
                                     description="Fit a cubic B-spline surface to a noisy triangle mesh.")
    sub = parser.add_subparsers(dest="command", required=True)
    fit = sub.add_parser("fit", help="run the full pipeline from a key=value config file")
    fit.add_argument("config", help="path to the config file")
    fit.add_argument("--phi", type=float, help="ear angle threshold in degrees")
    fit.add_argument("--kappa", type=float, help="absolute knot-selection error threshold")
    fit.add_argument("--max-depth", type=int, help="maximum subdivision depth")
    fit.add_argument("--k-neighbors", type=int, help="MLS neighbourhood size")
    fit.add_argument("--window", choices=("gaussian", "truncated"))
    fit.add_argument("--fitter", choices=("blended", "global", "both"))
    fit.add_argument("--dump-intermediate", metavar="DIR", help="write intermediate meshes here")
    fit.add_argument("--seed", type=int)
    fit.add_argument("--output-dir", help="override the config's output_dir")
    fit.add_argument("--json", action="store_true", help="print the JSON report instead of text")
    fit.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {key: getattr(args, attr) for attr, key in _OVERRIDES.items()
                 if getattr(args, attr) is not None}
    if args.output_dir is not None:
        overrides["output_dir"] = args.output_dir
    try:
        cfg = PipelineConfig.from_file(args.config, overrides)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        report, _ = run_pipeline(cfg)
    except PipelineError as exc:
        print(exc.report.to_text(), file=sys.stderr)
        return 1
    print(report.to_json() if args.json else report.to_text())
    return 0


if __name__ == "__main__":
    sys.exit(main())
