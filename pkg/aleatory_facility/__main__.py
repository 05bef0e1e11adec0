"""Entry point for running aleatory_facility as a module."""

import argparse
import logging
import sys
from pathlib import Path

from aleatory_facility import __version__
from aleatory_facility.config import load_experiment_config, parse_ells
from aleatory_facility.errors import FacilityLocationError
from aleatory_facility.experiments import run


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    """Parse command line arguments."""
    parser = argparse.ArgumentParser(
        prog="aleatory-facility",
        description="Facility location with aleatory agents: solvers, mechanisms and bound experiments",
    )

    parser.add_argument(
        "--config",
        type=Path,
        required=True,
        help="Path to a JSON experiment config",
    )

    parser.add_argument(
        "--out",
        type=Path,
        default=None,
        help="Write the artifact here instead of stdout",
    )

    parser.add_argument(
        "--seed",
        type=int,
        default=None,
        help="Override the config seed",
    )

    parser.add_argument(
        "--ell",
        type=str,
        default=None,
        help="Comma separated, increasing concentration schedule, e.g. 10,100,1000",
    )

    parser.add_argument(
        "-v",
        "--verbose",
        action="store_true",
        help="Log at DEBUG level on stderr",
    )

    parser.add_argument(
        "-V",
        "--version",
        action="version",
        version=f"%(prog)s {__version__}",
    )

    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> None:
    """Main entry point for the command line."""
    args = parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    try:
        config = load_experiment_config(args.config)
        ells = parse_ells(args.ell) if args.ell is not None else None
        config = config.with_overrides(out=args.out, seed=args.seed, ells=ells)
        status = run(config)
    except FacilityLocationError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        sys.exit(exc.code)

    sys.exit(status)


if __name__ == "__main__":
    main()
