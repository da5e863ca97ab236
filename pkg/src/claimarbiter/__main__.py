import sys

from claimarbiter.cli import main

sys.exit(main())
