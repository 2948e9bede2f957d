"""Allow ``python -m oikos`` as an alias for the ``oikos`` console script."""

import sys

from .cli import main

sys.exit(main())
