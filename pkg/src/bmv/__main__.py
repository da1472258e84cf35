import sys

from bmv.cli import main

sys.exit(main())
