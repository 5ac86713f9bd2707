import argparse

from sparsebench import __version__
from sparsebench.cli import report, run, validate


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparsebench",
        description="Benchmark classical and Bayesian sparse linear regression",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", help="Override LOG_LEVEL (DEBUG, INFO, WARNING, ...)")
    subparsers = parser.add_subparsers(dest="command", required=True)

    run.register(subparsers)
    report.register(subparsers)
    validate.register(subparsers)
    return parser
