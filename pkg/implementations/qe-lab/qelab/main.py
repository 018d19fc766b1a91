# qelab/main.py

import argparse
import sys
from typing import Optional, Sequence

from loguru import logger

from qelab.config import settings
from qelab.errors import (
    EXIT_CHECK_FAILED,
    EXIT_OK,
    ConfigError,
    QELabError,
    exit_code_for,
    handle_error,
)
from qelab.schemas.run_config import GridSpec, RunConfig
from qelab.services import reporting
from qelab.utils.logging import setup_logging

# flag -> parameter name in the catalog
PARAM_FLAGS = {
    "m": "m",
    "a": "a",
    "c": "c",
    "p": "p",
    "mu": "mu",
    "lambda_": "lambda",
    "tau": "tau",
}


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config", help="JSON run configuration; flags override its values"
    )
    common.add_argument("--json", action="store_true", help="print the report as JSON")
    common.add_argument(
        "--out", help="write the report (profile: CSV rows) to this path"
    )
    common.add_argument("--seed", type=int)
    common.add_argument(
        "--tol", type=float, help="override the primary tolerance of the command"
    )
    common.add_argument(
        "--grid", help='points per axis ("7") or axes ("lo:hi:n,lo:hi:n,...")'
    )
    common.add_argument("--loop-budget", type=int)
    common.add_argument("--log-level", default=settings.LOG_LEVEL)
    for flag, name in PARAM_FLAGS.items():
        common.add_argument(
            f"--{flag.rstrip('_')}", dest=flag, type=float, help=f"parameter {name}"
        )
    common.add_argument(
        "--param",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="any other example parameter",
    )
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qe-lab", description="Numerical laboratory for quasi-Einstein manifolds"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_options()

    zoo = sub.add_parser("zoo", parents=[common], help="list the example catalog")
    zoo.add_argument("--dim", type=int, help="only entries of this dimension")

    for name, text in (
        ("verify", "run the identity suite on an example"),
        ("dim", "estimate the dimension of the solution space"),
    ):
        cmd = sub.add_parser(name, parents=[common], help=text)
        cmd.add_argument("example")
        cmd.add_argument("--potential", help="potential on an end chart")

    profile = sub.add_parser(
        "profile", parents=[common], help="integrate a profile family"
    )
    profile.add_argument("example", metavar="family")

    asympt = sub.add_parser(
        "asympt", parents=[common], help="decay and growth checks on an end"
    )
    asympt.add_argument("example", metavar="end")
    asympt.add_argument("--potential", help="synthetic potential for the growth checks")
    return parser


def _parse_param(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise ConfigError(f"--param expects KEY=VALUE, got {text!r}")
    key, value = text.split("=", 1)
    try:
        return key.strip(), float(value)
    except ValueError:
        return key.strip(), value.strip()


def _tolerance_override(command: str, tol: float) -> dict:
    if command == "dim":
        return {"singular": tol}
    if command == "profile":
        return {"profile": tol}
    return {"residual": tol, "fd_residual": tol}


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """Merge a config file with command-line flags; flags win."""
    params = {
        name: getattr(args, flag)
        for flag, name in PARAM_FLAGS.items()
        if getattr(args, flag) is not None
    }
    params.update(_parse_param(p) for p in args.param)

    data = {"command": args.command}
    if args.config:
        base = RunConfig.from_file(args.config).model_dump(exclude_unset=True)
        if base.get("command") not in (None, args.command):
            raise ConfigError(
                f"config is for {base['command']!r}, "
                f"command line asks for {args.command!r}"
            )
        data.update(base)
        data["command"] = args.command
    if getattr(args, "example", None):
        data["example"] = args.example
    if params:
        data["params"] = {**data.get("params", {}), **params}
    if args.grid:
        data["grid"] = GridSpec.parse(args.grid).model_dump(exclude_none=True)
    if args.tol is not None:
        data["tolerances"] = {
            **data.get("tolerances", {}),
            **_tolerance_override(args.command, args.tol),
        }
    if args.seed is not None:
        data["seed"] = args.seed
    if args.loop_budget is not None:
        data["loop_budget"] = args.loop_budget
    if getattr(args, "dim", None) is not None:
        data["dim_filter"] = args.dim
    if getattr(args, "potential", None):
        data["potential"] = args.potential
    output = dict(data.get("output", {}))
    if args.out:
        output["path"] = args.out
    if args.json:
        output["format"] = "json"
    data["output"] = output
    return RunConfig.build(**data)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command and return its exit code."""
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        config = config_from_args(args)
        report = reporting.execute(config)
    except QELabError as e:
        logger.error(handle_error(e))
        return exit_code_for(e)
    except Exception as e:
        logger.exception(handle_error(e))
        return exit_code_for(e)

    if config.output.path and config.command != "profile":
        reporting.write_report(report, config.output.path)
    if config.output.format == "json":
        print(reporting.to_json(report))
    else:
        print(reporting.to_text(report))
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
