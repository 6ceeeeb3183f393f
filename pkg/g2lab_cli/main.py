from __future__ import annotations

import argparse
import asyncio
import logging
import sys
from pathlib import Path
from typing import Any, NoReturn, Sequence

from pydantic import ValidationError

from g2lab import __version__
from g2lab.exceptions import (
    EigenConvergenceError,
    G2LabError,
    InadmissibleConfigError,
    InvalidGridError,
    NewtonDivergenceError,
    ScalingFitError,
    UnderresolvedGridError,
)
from g2lab.octo_algebra import TauKey
from g2lab_cli import commands
from g2lab_cli.config import (
    config,
    experiment_defaults,
    grid_policy,
    load_overrides,
    numerics_settings,
)
from g2lab_cli.models import Command, ExperimentConfig

logger = logging.getLogger(__name__)

# argparse destination -> ExperimentConfig field
FLAG_FIELDS = {
    "epsilon": "epsilon",
    "epsilons": "epsilons",
    "m": "m",
    "n2": "n2",
    "n3": "n3",
    "twist": "twist",
    "h": "warp",
    "p": "p",
    "alpha_holder": "alpha_holder",
    "probe": "probe",
    "gamma": "gamma",
    "w0_norm": "w0_norm",
    "full_newton": "full_newton",
    "lattice": "lattice",
    "random_cases": "random_cases",
    "seed": "seed",
    "format": "format",
    "output": "output",
}


class UsageError(Exception):
    pass


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        raise UsageError(f"{self.prog}: {message}")


def tau_key(text: str) -> TauKey:
    try:
        values = tuple(int(item) for item in text.split(","))
    except ValueError as error:
        raise argparse.ArgumentTypeError(f"expected i,j,k,alpha, got {text!r}") from error
    if len(values) != 4 or not all(1 <= item <= 7 for item in values):
        raise argparse.ArgumentTypeError(f"expected four indices in 1..7, got {text!r}")
    if len(set(values[:3])) != 3:
        raise argparse.ArgumentTypeError(f"i, j, k must be distinct, got {text!r}")
    return values  # type: ignore[return-value]


def build_parser() -> ArgumentParser:
    common = ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML file of key = value overrides")
    common.add_argument("--format", choices=["json", "csv"])
    common.add_argument("--output", help="write the report to this file")
    common.add_argument("--seed", type=int)
    common.add_argument("--verbose", action="store_true")

    cylinder = ArgumentParser(add_help=False)
    cylinder.add_argument("--n2", type=int)
    cylinder.add_argument("--n3", type=int)
    cylinder.add_argument("--twist", type=float, nargs=2, metavar=("ALPHA", "BETA"))
    cylinder.add_argument("--h", help="warp profile, const:c or cos:c0,c1,K")

    single = ArgumentParser(add_help=False)
    single.add_argument("--epsilon", type=float)
    single.add_argument("--m", type=int, help="x1 subdivisions")

    parser = ArgumentParser(prog="g2lab", description="Associative calibration experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    selfcheck = subparsers.add_parser(
        Command.ALGEBRA_SELFCHECK, parents=[common], help="exact octonion identity checks"
    )
    selfcheck.add_argument("--json", action="store_true", help="print the JSON report")
    selfcheck.add_argument("--corrupt-tau", type=tau_key, help=argparse.SUPPRESS)

    spectrum = subparsers.add_parser(
        Command.SPECTRUM, parents=[common, cylinder, single], help="lambda_D against its bound"
    )
    spectrum.add_argument("--snapshot", type=Path, help="write the lowest mode (.json or binary)")

    scaling = subparsers.add_parser(
        Command.SCALING, parents=[common, cylinder], help="inverse norm growth as epsilon shrinks"
    )
    scaling.add_argument("--epsilons", type=float, nargs="+")
    scaling.add_argument("--p", type=float)
    scaling.add_argument("--alpha-holder", type=float)
    scaling.add_argument("--probe", choices=["all", "boundary-hard", "interior", "mixed"])

    linearize = subparsers.add_parser(
        Command.LINEARIZE, parents=[common], help="finite-difference linearization check"
    )
    linearize.add_argument("--lattice", type=int)
    linearize.add_argument("--random-cases", type=int)

    newton = subparsers.add_parser(
        Command.NEWTON, parents=[common, cylinder, single], help="toy instanton Newton solve"
    )
    newton.add_argument("--gamma", type=float)
    newton.add_argument("--w0-norm", type=float)
    newton.add_argument("--full-newton", action="store_true", default=None)
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    values: dict[str, Any] = experiment_defaults()
    if args.config is not None:
        values.update(load_overrides(args.config))
    for dest, name in FLAG_FIELDS.items():
        value = getattr(args, dest, None)
        if value is not None:
            values[name] = value
    return ExperimentConfig.model_validate(values)


def configure_logging(verbose: bool) -> None:
    level = "DEBUG" if verbose else str(config.get("log_level", "WARNING")).upper()
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


def dispatch(args: argparse.Namespace, cfg: ExperimentConfig) -> commands.Outcome:
    settings = numerics_settings()
    command = Command(args.command)
    if command is Command.ALGEBRA_SELFCHECK:
        return commands.algebra_selfcheck(cfg, args.corrupt_tau)
    if command is Command.SPECTRUM:
        return commands.spectrum(cfg, settings, args.snapshot)
    if command is Command.SCALING:
        return asyncio.run(commands.scaling(cfg, settings, grid_policy(cfg.n2, cfg.n3)))
    if command is Command.LINEARIZE:
        return commands.linearize(cfg, settings)
    return commands.newton(cfg, settings)


def emit(outcome: commands.Outcome, cfg: ExperimentConfig, explicit_format: bool) -> None:
    text = commands.render(outcome.report, cfg.format)
    if cfg.output:
        Path(cfg.output).write_text(text)
        logger.info("wrote %s report to %s", cfg.format, cfg.output)
        print(outcome.summary)
    elif explicit_format:
        sys.stdout.write(text)
    else:
        print(outcome.summary)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as error:
        parser.print_usage(sys.stderr)
        print(error, file=sys.stderr)
        return commands.EXIT_USAGE
    except SystemExit as exit_:
        return int(exit_.code or 0)

    if getattr(args, "json", False) and args.format is None:
        args.format = "json"
    configure_logging(args.verbose)
    try:
        cfg = resolve_config(args)
        outcome = dispatch(args, cfg)
    except (ValidationError, FileNotFoundError, ScalingFitError, InvalidGridError) as error:
        logger.error("%s", error)
        return commands.EXIT_USAGE
    except InadmissibleConfigError as error:
        logger.error("inadmissible Newton constants (%s): %s", error.violated, error)
        return commands.EXIT_INADMISSIBLE
    except (EigenConvergenceError, NewtonDivergenceError, UnderresolvedGridError) as error:
        logger.error("%s", error)
        return commands.EXIT_NONCONVERGENCE
    except G2LabError as error:
        logger.error("%s", error)
        return commands.EXIT_INVARIANT
    except ValueError as error:
        logger.error("%s", error)
        return commands.EXIT_USAGE

    emit(outcome, cfg, explicit_format=args.format is not None)
    if outcome.exit_code:
        logger.error("%s check failed", args.command)
    return outcome.exit_code


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
