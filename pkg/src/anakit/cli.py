"""Script for command-line functionality `anakit`."""

from __future__ import annotations

import argparse
import logging
import pathlib
import sys

import numpy as np

from anakit import autodiff as ad, config, experiments, utils


EXIT_USAGE = 2


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="CLI for adversarial numerical analysis of stochastic forward models."
    )
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG"
    )
    verbs = parser.add_subparsers(dest="verb", required=True)

    def with_overrides(sub: argparse.ArgumentParser) -> None:
        sub.add_argument(
            "config", type=pathlib.Path, help="Experiment configuration (TOML or manifest.json)"
        )
        sub.add_argument("--seed", type=int, default=None, help="Override [experiment] seed")
        sub.add_argument(
            "--out-dir", type=pathlib.Path, default=None, help="Override [experiment] out_dir"
        )
        sub.add_argument(
            "--max-iter", type=int, default=None, help="Override [train] max_iterations"
        )

    with_overrides(verbs.add_parser("run", help="Run an experiment and write its artifacts"))
    with_overrides(verbs.add_parser("gen", help="Generate the synthetic data set of an experiment"))
    with_overrides(
        verbs.add_parser("scan", help="Scan the discrete-KL landscape over kappa and tau")
    )

    compare = verbs.add_parser(
        "compare", help="Compare a sample file against a target distribution"
    )
    compare.add_argument("samples", type=pathlib.Path, help="CSV file with one sample per row")
    names = ", ".join(experiments.target_names())
    compare.add_argument(
        "target",
        type=str,
        help=f"Target spec 'name' or 'name:key=value,...'; names: {names}",
    )
    compare.add_argument("--seed", type=int, default=0, help="Seed for the reference draws")
    return parser


def _load_spec(args: argparse.Namespace) -> config.ExperimentSpec | None:
    spec = config.load_config(args.config)
    if isinstance(spec, config.ParseError):
        print(f"Invalid configuration {args.config}: {spec.msg}", file=sys.stderr)
        return None
    return spec.with_overrides(seed=args.seed, out_dir=args.out_dir, max_iterations=args.max_iter)


def _print_summary(summary: dict) -> None:
    for key, value in summary.items():
        print(f"{key} = {value}")


def run(argv: list[str] | None = None) -> int:
    """Parse `argv` and execute the verb; returns the exit status."""
    parser = _parser()
    args = parser.parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    if args.verb == "compare":
        try:
            samples = utils.read_samples(args.samples)
            report = experiments.compare_histogram(
                samples, args.target, np.random.default_rng(args.seed)
            )
        except experiments.UnknownTargetError as e:
            print(f"Invalid target: {e}", file=sys.stderr)
            return EXIT_USAGE
        except (OSError, ValueError) as e:
            print(f"Cannot compare {args.samples}: {e}", file=sys.stderr)
            return EXIT_USAGE
        _print_summary(report.to_dict())
        return experiments.EXIT_OK

    spec = _load_spec(args)
    if spec is None:
        return EXIT_USAGE

    try:
        if args.verb == "gen":
            data = experiments.make_dataset(spec)
            _print_summary({name: str(path) for name, path in data.files.items()})
            return experiments.EXIT_OK
        if args.verb == "scan":
            result = experiments.run_landscape(spec)
        else:
            result = experiments.run_experiment(spec)
    except (ad.ContractError, experiments.UnknownTargetError) as e:
        print(f"Invalid experiment: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ArithmeticError as e:
        print(f"Numerical failure: {e}", file=sys.stderr)
        return experiments.EXIT_ABORTED

    _print_summary(result.summary)
    return result.status


def main() -> None:
    """Entry point of the `anakit` console script.

    Example usage of CLI: "anakit run option.toml --seed 3 --max-iter 10000"
    """
    sys.exit(run())


if __name__ == "__main__":
    main()
