# kslab/commands/__init__.py
from __future__ import annotations

import functools
import logging

import click

from kslab.errors import EX_INCONCLUSIVE, KslabError, exit_code_for
from kslab.extensions import logger


def guarded(tag: str):
    """
    Turn a command body into one that returns an exit code: deliberate
    KslabErrors are logged on one line, anything else with its traceback.
    """
    def wrap(fn):
        @functools.wraps(fn)
        def inner(*args, **kwargs) -> int:
            try:
                return int(fn(*args, **kwargs) or 0)
            except click.ClickException:
                raise
            except KslabError as ex:
                level = logging.WARNING if ex.exit_code == EX_INCONCLUSIVE else logging.ERROR
                logger.log(level, "[%s] %s", tag, ex)
                return ex.exit_code
            except Exception as ex:
                logger.exception(f"[{tag}] failed: {ex}")
                return exit_code_for(ex)
        return inner
    return wrap
