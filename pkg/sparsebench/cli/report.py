import argparse
import logging

from sparsebench.services.report import write_reports
from sparsebench.storage import csv_store

logger = logging.getLogger(__name__)

DEFAULT_OUT_DIR = "reports"


def register(subparsers) -> None:
    parser = subparsers.add_parser("report", help="Aggregate a results CSV into summary tables")
    parser.add_argument("--in", dest="input", required=True, help="Results CSV written by run")
    parser.add_argument("--out-dir", default=DEFAULT_OUT_DIR, help=f"Output directory (default {DEFAULT_OUT_DIR})")
    parser.add_argument(
        "--no-supplementary",
        dest="supplementary",
        action="store_false",
        help="Only write the five main tables",
    )
    parser.set_defaults(handler=report_command)


def report_command(args: argparse.Namespace) -> int:
    rows = csv_store.load(args.input)
    written = write_reports(rows, args.out_dir, supplementary=args.supplementary)
    logger.info(f"Wrote {len(written)} report tables to {args.out_dir}")
    return 0
