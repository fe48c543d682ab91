import sys

from quadsemigroup.cli import main

sys.exit(main())
