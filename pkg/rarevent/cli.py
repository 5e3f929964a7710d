"""
Command line entry point.

    rarevent run <config.toml | preset> [--seed N] [--out DIR] [-v]
    rarevent report <run-directory> [--curves PATH]

`run` exits with 0 when the driver converged, 2 when it stopped without converging,
and 1 on any error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import TYPE_CHECKING
from typing import Sequence

from rarevent.akmcs import AkmcsConfig
from rarevent.akmcs import run_akmcs
from rarevent.config import load_config
from rarevent.config import preset_names
from rarevent.coupled import run_coupled
from rarevent.exceptions import RareventError
from rarevent.persistence import cumulative_curves
from rarevent.persistence import read_runs
from rarevent.persistence import report_table
from rarevent.persistence import write_run
from rarevent.subset import run_sus

if TYPE_CHECKING:
    from rarevent.config import RunConfig
    from rarevent.estimate import FailureEstimate

_logger = logging.getLogger("rarevent")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2


def execute(run_config: RunConfig) -> FailureEstimate:
    """Run the driver a validated configuration selects."""
    settings = run_config.settings
    try:
        if run_config.driver == "akmcs":
            assert isinstance(settings, AkmcsConfig)  # noqa: S101
            return run_akmcs(run_config.space, run_config.hf, settings)
        if run_config.driver == "sus":
            return run_sus(run_config.space, run_config.hf, settings)  # type: ignore[arg-type]
        estimate, _ = run_coupled(
            run_config.model, run_config.space, settings  # type: ignore[arg-type]
        )
        return estimate
    finally:
        for evaluator in (run_config.hf, run_config.lf):
            close = getattr(evaluator, "close", None)
            if close is not None:
                close()


def run(source: str, *, seed: int | None = None, out: str | None = None) -> int:
    try:
        run_config = load_config(source, seed=seed, output_dir=out)
    except RareventError as exc:
        _logger.error("Invalid configuration: %s", exc)  # noqa: TRY400
        return EXIT_ERROR
    _logger.info("Running %s driver from %s", run_config.driver, source)
    try:
        estimate = execute(run_config)
        write_run(
            run_config.output_dir,
            estimate,
            config=run_config.to_dict(),
            seed=run_config.seed,
        )
    except (RareventError, OSError) as exc:
        _logger.error("Run failed: %s", exc)  # noqa: TRY400
        return EXIT_ERROR
    if not estimate.converged:
        _logger.warning(
            "Run did not converge (degenerate=%s); results are in %s",
            estimate.degenerate,
            run_config.output_dir,
        )
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def report(directory: str, *, curves: str | None = None) -> int:
    runs = read_runs(directory)
    if not runs:
        _logger.error("No readable estimate JSON under %s", directory)
        return EXIT_ERROR
    print(report_table(runs).to_string())  # noqa: T201
    if curves is not None:
        try:
            cumulative_curves(directory, list(runs)).to_csv(curves, index=False)
        except OSError as exc:
            _logger.error("Could not write %s: %s", curves, exc)  # noqa: TRY400
            return EXIT_ERROR
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rarevent", description="Rare-event failure probability estimation."
    )
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="-v for progress messages, -vv for every model call decision",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="run one experiment")
    run_parser.add_argument(
        "config", help=f"TOML config file or preset ({', '.join(preset_names())})"
    )
    run_parser.add_argument("--seed", type=int, default=None, help="override `seed`")
    run_parser.add_argument("--out", default=None, help="override `output_dir`")

    report_parser = commands.add_parser("report", help="compare finished runs")
    report_parser.add_argument("directory", help="directory holding estimate.json files")
    report_parser.add_argument(
        "--curves", default=None, help="write cumulative HF-call curves to this CSV"
    )
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(
        level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )
    if args.command == "run":
        return run(args.config, seed=args.seed, out=args.out)
    return report(args.directory, curves=args.curves)


__all__ = ["build_parser", "execute", "main", "report", "run"]
