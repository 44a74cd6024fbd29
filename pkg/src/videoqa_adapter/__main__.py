import sys

from videoqa_adapter.cli import main

sys.exit(main())
