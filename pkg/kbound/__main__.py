import sys

from kbound.app.cli import cli_main

sys.exit(cli_main())
