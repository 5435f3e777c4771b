"""Entry point of the compressed video enhancement toolkit."""

import sys

from dotenv import load_dotenv

from evalcli.cli import main


# Load environment variables
load_dotenv()


if __name__ == "__main__":
    sys.exit(main())
