import sys

from sgdlab.cli import main

sys.exit(main())
