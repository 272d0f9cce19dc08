"""Command-line entry point.

BLAS thread pools are pinned to one thread before numpy loads so that
batched linear algebra sums in a fixed order; reproducibility across
--threads then follows from the fixed trajectory chunking.
"""

from __future__ import annotations

import argparse
import os
import sys


def _pin_blas_threads():
    for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = "1"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simulate",
        description=(
            "Monte-Carlo simulation of photon transport through a two-dimensional "
            "atom array: transmission/reflection spectra of the cooperative mirror "
            "and its microwave-photon switching."
        ),
    )
    parser.add_argument("--config", help="INI config file (overrides preset values)")
    parser.add_argument(
        "--preset",
        help="named parameter set: fig1, fig3-empty, fig3-photon, fig4-empty, fig4-photon",
    )
    parser.add_argument("--seed", type=int, help="base seed for all random draws")
    parser.add_argument("--trajectories", type=int, help="Monte-Carlo trajectories per point")
    parser.add_argument("--threads", type=int, default=1, help="worker processes (default 1)")
    parser.add_argument("--out", help="output directory (default from config)")
    parser.add_argument(
        "--format", choices=("csv", "json"), help="restrict output to one format"
    )
    parser.add_argument("--quiet", action="store_true", help="suppress per-point progress")
    return parser


def main(argv=None) -> int:
    _pin_blas_threads()
    args = build_parser().parse_args(argv)
    if args.config is None and args.preset is None:
        print("error: provide --config and/or --preset", file=sys.stderr)
        return 2

    import dataclasses

    from . import runner

    try:
        config = runner.preset(args.preset) if args.preset else runner.RunConfig()
        if args.config:
            config = runner.load_config(args.config, base=config)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    mc = config.mc
    if args.seed is not None:
        mc = dataclasses.replace(mc, seed=args.seed)
    if args.trajectories is not None:
        mc = dataclasses.replace(mc, trajectories=args.trajectories)
    out = config.output
    if args.format is not None:
        out = dataclasses.replace(out, formats=(args.format,))
    if args.out is not None:
        out = dataclasses.replace(out, directory=args.out)
    config = dataclasses.replace(config, mc=mc, output=out)

    log = None if args.quiet else lambda msg: print(msg, flush=True)
    try:
        spectrum = runner.run(config, threads=max(1, args.threads), log=log)
    except (RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    directory = config.output.directory
    n = len(spectrum.detunings)
    print(f"wrote {n} spectrum point{'s' if n != 1 else ''} to {os.path.abspath(directory)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
