import sys

from phylodyn_ps.cli import main

sys.exit(main())
