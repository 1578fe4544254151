"""Allow `python -m qkd_simulator`."""
import sys

from qkd_simulator.cli import main

if __name__ == "__main__":
    sys.exit(main())
