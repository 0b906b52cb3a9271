import sys

from trajmine.cli import main

sys.exit(main())
