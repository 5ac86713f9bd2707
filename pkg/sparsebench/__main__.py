import sys

from sparsebench.main import cli

sys.exit(cli())
