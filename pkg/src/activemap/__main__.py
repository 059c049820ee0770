import sys

from activemap.cli import main

sys.exit(main())
