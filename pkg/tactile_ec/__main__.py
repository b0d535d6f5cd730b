import sys

from tactile_ec.cli import main

sys.exit(main())
