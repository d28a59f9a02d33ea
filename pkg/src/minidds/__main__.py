import sys

from minidds.cli import main

sys.exit(main())
