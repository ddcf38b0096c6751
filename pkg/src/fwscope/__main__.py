import sys

from fwscope.cli import main

sys.exit(main())
