import sys

from qvcrl.cli import main

sys.exit(main())
