import sys

from wdnsolve.cli import main

sys.exit(main())
