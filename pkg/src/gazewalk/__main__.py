import sys

from gazewalk.cli import main

sys.exit(main())
