import sys

from messcore.cli import main

sys.exit(main())
