"""Main entry point for the poisonwatch package."""

import sys

from poisonwatch.application.cli.app import dispatch


def main() -> None:
    """Entry point of the poisonwatch command."""
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
