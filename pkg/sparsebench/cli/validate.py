import argparse
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).resolve().parents[2] / "tests"


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "validate", help="Run the property and oracle test suite (laptop sized)"
    )
    parser.add_argument("--runslow", action="store_true", help="Include the desk-scale reproduction runs")
    parser.set_defaults(handler=validate_command)


def validate_command(args: argparse.Namespace) -> int:
    if not TESTS_DIR.is_dir():
        raise FileNotFoundError(f"Test suite not found at {TESTS_DIR}")
    pytest_args = ["-q", str(TESTS_DIR)]
    if args.runslow:
        pytest_args.append("--runslow")
    return int(pytest.main(pytest_args))
