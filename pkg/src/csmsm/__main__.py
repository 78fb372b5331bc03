import sys

from csmsm.cli import main

sys.exit(main())
