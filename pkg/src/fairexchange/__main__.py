import sys

from fairexchange.cli import main

sys.exit(main())
