import sys

from halvingeta.halvingeta_cli.__main__ import main

__all__ = ["main"]


if __name__ == "__main__":
    sys.exit(main())
