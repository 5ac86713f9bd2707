import argparse
import logging

from sparsebench.core.config import load_settings
from sparsebench.core.exceptions import ConfigError
from sparsebench.services.harness import ExperimentRunner
from sparsebench.storage import csv_store

logger = logging.getLogger(__name__)

DEFAULT_OUT = "results/results.csv"


def register(subparsers) -> None:
    parser = subparsers.add_parser("run", help="Run the experiment grid and write the results CSV")
    parser.add_argument("--config", help="KEY=VALUE settings file (see configs/)")
    parser.add_argument("--out", default=DEFAULT_OUT, help=f"Results CSV (default {DEFAULT_OUT})")
    parser.add_argument("--jobs", type=int, help="Worker processes (default JOBS / SPARSEBENCH_JOBS)")
    parser.add_argument("--subset", help="Axis filters, e.g. p=20,model=lasso")
    parser.add_argument(
        "--bayes-at-p100",
        action="store_true",
        default=None,
        help="Also run the Bayesian models at p >= 100",
    )
    parser.set_defaults(handler=run_command)


def run_command(args: argparse.Namespace) -> int:
    """
    Expand the grid, run every selected experiment and persist the rows.
    """
    settings = load_settings(args.config)
    if args.jobs is not None and args.jobs < 1:
        raise ConfigError(f"--jobs must be at least 1, got {args.jobs}")

    runner = ExperimentRunner(settings, jobs=args.jobs)
    specs = runner.specs(subset=args.subset, bayes_at_p100=args.bayes_at_p100)
    if not specs:
        logger.warning("No experiments match the requested subset")
    rows = runner.run(specs)
    path = csv_store.persist(rows, args.out)
    logger.info(f"Wrote {len(rows)} rows to {path}")
    return 0
