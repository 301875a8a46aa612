"""Command-line entry point: ``cellfree-mp {convergence,cdf,timing,solve}``."""

import argparse
import dataclasses
import logging
import sys

from . import __version__
from .experiments import Scenario, run_cdf, run_convergence, run_solve, run_timing

log = logging.getLogger("cellfree_mp")

COMMANDS = {
    "convergence": run_convergence,
    "cdf": run_cdf,
    "timing": run_timing,
    "solve": None,
}


def _omega(text):
    if text.strip().upper() == "M":
        return "M"
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"omega must be a positive float or 'M', got {text!r}")
    if value <= 0:
        raise argparse.ArgumentTypeError("omega must be positive")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _seed(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cellfree-mp",
        description="Max-min fair uplink power control experiments for cell-free massive MIMO.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--scenario", help="scenario JSON file; defaults are used when omitted")
        p.add_argument("--seed", type=_seed, help="base RNG seed (realization r uses seed + r)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--omega", type=_omega, action="append",
                       help="scaling factor, a float or 'M'; repeat to sweep")
        p.add_argument("--realizations", type=_positive_int, help="number of channel realizations")
        p.add_argument("--workers", type=_positive_int, default=1, help="worker processes")
        p.add_argument("--max-iter", type=_positive_int,
                       help="iteration budget (convergence traces)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def scenario_from_args(args):
    scenario = Scenario.from_json(args.scenario) if args.scenario else Scenario()
    if args.seed is not None:
        scenario.network = scenario.network.replace(rng_seed=args.seed)
    if args.out:
        scenario.output_dir = args.out
    if args.omega:
        scenario.omega = tuple(args.omega)
    if args.realizations:
        scenario.num_realizations = args.realizations
    if args.max_iter:
        scenario.max_iter = args.max_iter
        if args.command != "convergence":
            scenario.mp = dataclasses.replace(scenario.mp, max_iter=args.max_iter)
    return scenario


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        scenario = scenario_from_args(args)
        if args.command == "solve":
            path = run_solve(scenario)
        else:
            path = COMMANDS[args.command](scenario, workers=args.workers)
    except (OSError, ValueError) as exc:
        print(f"cellfree-mp: error: {exc}", file=sys.stderr)
        return 2
    log.info("wrote %s", path)
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
