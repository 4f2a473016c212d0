"""Command-line front end: ``ppd-lab run|audit|list-models``.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 numerical
failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from .config import ExperimentConfig, parse_config
from .conjugate import registered_pairs
from .errors import ConfigError, DomainError, HyperparameterError, NumericalError, PPDLabError
from .harness import ENGINES
from .losses import LossKind
from .models import MODELS
from .priors import PRIORS
from .report import run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"{text} is not an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ppd-lab",
        description="Posterior predictive density experiments: risk curves and consistency traces.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log debug messages")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the experiment described by a TOML config")
    run.add_argument("config", help="path to the config file")
    run.add_argument("--out", help="output directory (overrides output_dir)")
    run.add_argument("--seed", type=_u64, help="base seed (overrides base_seed)")
    run.add_argument("--replications", type=_positive, help="replications per sample size")

    audit = sub.add_parser("audit", help="run a built-in audit")
    audit.add_argument("which", choices=("identity", "martingale"))
    audit.add_argument("--fixtures", type=_positive, help="number of random fixtures")
    audit.add_argument("--seed", type=_u64, default=0, help="fixture seed (default 0)")
    audit.add_argument("--out", default="ppd-lab-out", help="output directory (default ppd-lab-out)")

    sub.add_parser("list-models", help="list registered models and priors")
    return parser


def _list_models() -> str:
    lines = ["models:"]
    lines += [f"  {name}" for name in MODELS]
    lines.append("priors:")
    lines += [f"  {kind}" for kind in PRIORS]
    lines.append("conjugate pairs (model / prior):")
    lines += [f"  {m} / {p}" for m, p in registered_pairs()]
    lines.append("engines: " + ", ".join(ENGINES))
    lines.append("losses: " + ", ".join(k.value for k in LossKind))
    return "\n".join(lines)


def _run(args) -> None:
    config = parse_config(args.config)
    config = config.with_overrides(base_seed=args.seed, replications=args.replications)
    run_experiment(config, out_dir=args.out)


def _audit(args) -> None:
    experiment = f"{args.which}-audit"
    fixtures = args.fixtures or (200 if args.which == "identity" else 100)
    config = ExperimentConfig(experiment=experiment, base_seed=args.seed, fixtures=fixtures,
                              output_dir=args.out)
    run_experiment(config.with_overrides())


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "list-models":
            print(_list_models())
        elif args.command == "run":
            _run(args)
        else:
            _audit(args)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (HyperparameterError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except PPDLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
