import sys

from cbirec.cli import main

sys.exit(main())
