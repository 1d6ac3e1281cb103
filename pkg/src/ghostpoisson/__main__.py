import sys

from ghostpoisson.cli import main

sys.exit(main())
