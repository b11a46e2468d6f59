"""Command-line entry point.

::

    ctgibbs simulate    --config run.ini [--out DIR]
    ctgibbs reconstruct --config run.ini --data DIR [--out DIR]
    ctgibbs report      --chains DIR

Without ``--out``, bundles go to ``<root>/data`` and ``<root>/chains`` where
``<root>`` is ``[output] dir`` from the configuration, else the
``CTGIBBS_OUTPUT_ROOT`` environment variable, else ``./ctgibbs_out``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .bundles import load_data, reconstruct, report, simulate
from .cgls import CGLSBreakdown
from .config import ConfigError, load_config
from .gibbs import SamplerError
from .io import BundleError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

log = logging.getLogger("ctgibbs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctgibbs", description="Fan-beam CT reconstruction with uncertain view angles.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log sampler progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a phantom, perturbed angles and a noisy sinogram")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="data bundle directory")

    p = sub.add_parser("reconstruct", help="run the hybrid Gibbs sampler on a data bundle")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True, help="data bundle directory")
    p.add_argument("--out", help="chain bundle directory")

    p = sub.add_parser("report", help="summarize a chain bundle")
    p.add_argument("--chains", required=True, help="chain bundle directory")
    return parser


def _dispatch(args) -> int:
    if args.command == "simulate":
        cfg = load_config(args.config)
        out = simulate(cfg, args.out or cfg.output_root() / "data")
        print(f"data bundle written to {out}")
    elif args.command == "reconstruct":
        cfg = load_config(args.config)
        data = load_data(args.data)
        out = args.out or cfg.output_root() / "chains"
        meta = reconstruct(cfg, data, out, progress=args.verbose)
        msg = f"chain bundle written to {out} ({meta['n_keep']} kept samples, {meta['model_calls_total']} model calls)"
        if "eta" in meta:
            msg += f"; eta = {meta['eta']:.4g}"
        print(msg)
    else:
        report(args.chains, stream=sys.stdout)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors, which is also our config code
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BundleError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SamplerError, CGLSBreakdown, FloatingPointError, OverflowError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
