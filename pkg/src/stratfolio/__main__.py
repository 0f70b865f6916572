"""Allow ``python -m stratfolio``."""

import sys

from .cli import main

sys.exit(main())
