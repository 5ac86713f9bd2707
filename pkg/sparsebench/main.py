import logging
import sys
from typing import List, Optional

from sparsebench.cli.cli import build_parser
from sparsebench.core.config import settings
from sparsebench.core.exceptions import BenchError
from sparsebench.core.log import configure_logging

logger = logging.getLogger(__name__)


def cli(argv: Optional[List[str]] = None) -> int:
    """
    Entry point for the ``sparsebench`` command; returns the process exit code.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse already printed usage or help
        return e.code if isinstance(e.code, int) else 2

    configure_logging(args.log_level or settings.LOG_LEVEL)
    try:
        return args.handler(args)
    except (BenchError, OSError, ValueError) as e:
        print(f"sparsebench {args.command}: {' '.join(str(e).split())}", file=sys.stderr)
        return 1
