"""
maskbuy command line.

    python -m src.harness.main simulate --config <path> --out <dir> [--parallelism k] [--seed-base s]
    python -m src.harness.main fit --summary <csv>
    python -m src.harness.main selftest

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from ..utils.errors import ConfigError, MaskbuyError
from ..utils.logger import default_data_dir, get_logger, log_run_event
from .config import load_experiment_config
from .experiment import run_experiment
from .fitting import fit_regret_exponent, read_summary
from .selftest import run_selftest

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

console = Console()


def _summary_table(summary, title: str) -> Table:
    table = Table(title=title)
    for column in ("T", "mean_regret", "stderr", "replicates"):
        table.add_column(column, justify="right")
    for row in summary.itertuples(index=False):
        table.add_row(str(row.T), f"{row.mean_regret:.4f}", f"{row.stderr:.4f}", str(row.replicates))
    return table


def _fit_line(fit) -> str:
    return (
        f"slope={fit.slope:.4f} intercept={fit.intercept:.4f} r^2={fit.r_squared:.4f} "
        f"points={fit.n_points} excluded={fit.excluded}"
    )


def cmd_simulate(args: argparse.Namespace, logger: logging.Logger) -> int:
    config = load_experiment_config(args.config)
    series = run_experiment(config, Path(args.out), parallelism=args.parallelism, seed_base=args.seed_base)
    console.print(_summary_table(series.summary, f"{config.name} ({config.strategy.id})"))
    fit_file = Path(args.out) / "fit.txt"
    if fit_file.exists():
        console.print(fit_file.read_text(encoding="utf-8").strip())
    logger.info(f"Wrote outputs to {args.out}")
    return EXIT_OK


def cmd_fit(args: argparse.Namespace, logger: logging.Logger) -> int:
    path = Path(args.summary)
    if not path.exists():
        raise ConfigError(f"summary file not found: {path}")
    summary = read_summary(path)
    fit = fit_regret_exponent(summary)
    console.print(_fit_line(fit))
    return EXIT_OK


def cmd_selftest(args: argparse.Namespace, logger: logging.Logger) -> int:
    results = run_selftest(console)
    return EXIT_OK if all(r.passed for r in results) else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maskbuy", description="Buyer-side learning in masked posted-price auctions")
    parser.add_argument("--data-dir", type=Path, default=None, help="Log directory root (default: $MASKBUY_DATA_DIR)")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="Run an experiment config")
    simulate.add_argument("--config", required=True, help="Experiment config (JSON)")
    simulate.add_argument("--out", required=True, help="Output directory")
    simulate.add_argument("--parallelism", type=int, default=1, help="Worker processes")
    simulate.add_argument("--seed-base", type=int, default=None, help="Override the config's seed base")
    simulate.set_defaults(handler=cmd_simulate)

    fit = sub.add_parser("fit", help="Fit a log-log regret exponent to a summary CSV")
    fit.add_argument("--summary", required=True, help="summary.csv written by simulate")
    fit.set_defaults(handler=cmd_fit)

    selftest = sub.add_parser("selftest", help="Run the brute-force equivalence and invariant checks")
    selftest.set_defaults(handler=cmd_selftest)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logger = get_logger(
        "src",
        data_dir=args.data_dir or default_data_dir(),
        level=logging.DEBUG if args.verbose else logging.INFO,
    )

    try:
        return args.handler(args, logger)
    except (ConfigError, ValidationError, json.JSONDecodeError) as e:
        error_code = getattr(e, "error_code", "config-error")
        log_run_event(logger, logging.ERROR, f"Configuration error: {e}", error_code=error_code)
        console.print(f"[red]configuration error:[/red] {e}")
        return EXIT_CONFIG
    except MaskbuyError as e:
        log_run_event(logger, logging.ERROR, f"{type(e).__name__}: {e}", error_code=e.error_code)
        console.print(f"[red]{e.error_code}:[/red] {e}")
        return EXIT_RUNTIME
    except Exception as e:
        logger.exception(f"Unexpected failure: {e}")
        console.print(f"[red]internal-error:[/red] {e}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
