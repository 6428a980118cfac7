import sys

from .jobrunner import main

sys.exit(main())
