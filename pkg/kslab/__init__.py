# kslab/__init__.py
import logging
import sys

import click

from config import get_config
from kslab.extensions import logger

__version__ = "0.1.0"


def _configure_logging(cfg) -> None:
    level = getattr(logging, cfg.LOG_LEVEL, logging.INFO)
    logger.setLevel(level)
    if not logger.handlers:
        handler = logging.StreamHandler(sys.stdout)
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
        logger.addHandler(handler)
    for handler in logger.handlers:
        handler.setLevel(level)
    # PositivityWarning and numerical warnings land in the same stream
    logging.captureWarnings(True)
    warnings_logger = logging.getLogger("py.warnings")
    if not warnings_logger.handlers:
        warnings_logger.addHandler(logger.handlers[0])


def create_cli() -> click.Group:
    cfg = get_config()
    _configure_logging(cfg)

    @click.group(name="kslab")
    @click.version_option(__version__, prog_name="kslab")
    @click.pass_context
    def cli(ctx: click.Context):
        """Numerical laboratory for radial Keller-Segel blow-up in N >= 3."""
        ctx.obj = cfg

    # Commands
    from kslab.commands.profile import profile_cmd
    cli.add_command(profile_cmd)

    from kslab.commands.simulate import simulate_cmd
    cli.add_command(simulate_cmd)

    from kslab.commands.intersect import intersect_cmd
    cli.add_command(intersect_cmd)

    from kslab.commands.report import report_cmd
    cli.add_command(report_cmd)

    from kslab.commands.sweep import sweep_cmd
    cli.add_command(sweep_cmd)

    return cli
