import argparse
import logging
import sys
from collections.abc import Sequence
from importlib.metadata import PackageNotFoundError, version

from .. import __version__
from ..errors import FshnnError
from . import commands

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports usage errors instead of exiting."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _version() -> str:
    try:
        return version("fshnnlib")
    except PackageNotFoundError:
        return __version__


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="fshnn",
        description=(
            "Generate benchmark data, train FS-HNN models and evaluate rollouts."
        ),
    )
    parser.add_argument("--version", action="version", version=f"fshnn {_version()}")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument(
        "-q", "--quiet", action="store_true", help="Only log warnings."
    )
    verbosity.add_argument(
        "-v", "--verbose", action="store_true", help="Log debug output."
    )
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    gen = sub.add_parser("gen", help="Generate a dataset from a config.")
    gen.add_argument("config")
    gen.add_argument(
        "--out", help="Dataset path (default <output_dir>/<name>_data.fsh)."
    )

    train = sub.add_parser("train", help="Train the configured model on a dataset.")
    train.add_argument("config")
    train.add_argument("dataset")
    train.add_argument(
        "--out", help="Checkpoint path (default <output_dir>/<name>_model.fsh)."
    )

    rollout = sub.add_parser(
        "rollout", help="Roll a checkpoint out from dataset frames."
    )
    rollout.add_argument("checkpoint")
    rollout.add_argument("dataset")
    rollout.add_argument("--steps", type=int, required=True)
    rollout.add_argument("--component", type=int, help="Roll out one FS-HNN component.")
    rollout.add_argument(
        "--n-traj", type=int, help="Use the first N trajectories only."
    )
    rollout.add_argument("--out")

    evaluate = sub.add_parser("eval", help="Compare a rollout with reference data.")
    evaluate.add_argument("pred")
    evaluate.add_argument("truth")
    evaluate.add_argument("--energy", metavar="SYSTEM", help="Report energy deviation.")
    evaluate.add_argument("--out", help="Report path stem.")

    table = sub.add_parser("table", help="Aggregate metric reports into a table.")
    table.add_argument("pattern", help="Glob of metric report JSON files.")
    table.add_argument(
        "--out", default="table.csv", help="CSV path (default table.csv)."
    )
    return parser


def _configure_logging(quiet: bool, verbose: bool) -> None:
    level = logging.WARNING if quiet else logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )


def run_command(argv: Sequence[str]) -> int:
    """
    Run one ``fshnn`` command.

    Returns
    -------
    int
        0 on success, 1 on a usage error, 2 when the command failed.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        # --help and --version
        return EXIT_OK if not e.code else EXIT_USAGE

    _configure_logging(args.quiet, args.verbose)
    try:
        if args.command == "gen":
            commands.cmd_gen(args.config, args.out)
        elif args.command == "train":
            commands.cmd_train(args.config, args.dataset, args.out)
        elif args.command == "rollout":
            if args.steps < 0:
                raise UsageError("fshnn rollout: error: --steps must be non-negative")
            commands.cmd_rollout(
                args.checkpoint,
                args.dataset,
                args.steps,
                args.component,
                args.n_traj,
                args.out,
            )
        elif args.command == "eval":
            commands.cmd_eval(args.pred, args.truth, args.energy, args.out)
        elif args.command == "table":
            print(commands.cmd_table(args.pattern, args.out))
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except (FshnnError, OSError, ValueError, KeyError) as e:
        logger.error("%s failed: %s", args.command, e)
        return EXIT_RUNTIME
    return EXIT_OK


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
