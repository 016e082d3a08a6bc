"""Allow `python -m gmle_mixtures`."""

import sys

from .cli import main

sys.exit(main())
