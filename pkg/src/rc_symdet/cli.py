"""``rc-symdet`` command line entry point."""

import argparse
import logging
import sys
from dataclasses import replace

from .errors import RcSymdetError
from .harness import DETECTORS, PROFILES, emit_report, load_config, run_sweep


def _parser():
    p = argparse.ArgumentParser(prog="rc-symdet", description="Reservoir-computing MIMO-OFDM detection experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a BER sweep and write its report")
    run.add_argument("--config", required=True, help="JSON experiment config (fields not given fall back to the profile)")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--seed", type=int, help="override the master seed")
    run.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")
    run.add_argument("--detectors", help=f"comma-separated subset of {','.join(DETECTORS)}")
    run.add_argument("--profile", choices=sorted(PROFILES), help="base profile for unspecified fields")
    run.add_argument("--emit-gnuplot", action="store_true", help="also write ber_<detector>.dat files")
    run.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.profile)
        if args.seed is not None:
            cfg = replace(cfg, master_seed=args.seed)
        if args.detectors:
            cfg = replace(cfg, detectors=tuple(d.strip() for d in args.detectors.split(",") if d.strip()))
        if args.workers < 1:
            raise ValueError("--workers must be >= 1")
        records, manifest, traces = run_sweep(cfg, workers=args.workers)
        emit_report(records, manifest, args.out, traces, gnuplot=args.emit_gnuplot)
    except (RcSymdetError, ValueError, OSError) as exc:
        print(f"rc-symdet: error: {exc}", file=sys.stderr)
        return 2
    for r in records:
        print(f"{r.detector:>11s}  {r.sweep_variable}={r.sweep_value:g}  ber={r.ber:.4e}")
    if manifest.partial:
        print(f"rc-symdet: {len(manifest.failures)} trial(s) failed; see manifest.json", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
