# kslab/cli.py
from __future__ import annotations

import sys
from typing import Sequence

import click

from kslab import create_cli
from kslab.errors import EX_INTERNAL, EX_USAGE, exit_code_for
from kslab.extensions import logger


def main(argv: Sequence[str] | None = None) -> int:
    """Run the CLI and return its exit code instead of exiting."""
    cli = create_cli()
    try:
        code = cli.main(args=list(argv) if argv is not None else None, prog_name="kslab",
                        standalone_mode=False)
    except click.UsageError as ex:
        ex.show()
        return EX_USAGE
    except click.Abort:
        return EX_INTERNAL
    except click.ClickException as ex:
        ex.show()
        return ex.exit_code
    except Exception as ex:
        logger.exception(f"[cli] failed: {ex}")
        return exit_code_for(ex)
    return int(code or 0)


if __name__ == "__main__":
    sys.exit(main())
