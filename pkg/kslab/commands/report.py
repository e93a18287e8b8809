# kslab/commands/report.py
from __future__ import annotations

from pathlib import Path

import click

from kslab.commands import guarded
from kslab.commands.intersect import blowup_time_for
from kslab.errors import EX_OK, NotEnoughData
from kslab.extensions import logger
from kslab.models import Termination
from kslab.services.analysis import build_report
from kslab.services.storage import load_run, read_json, save_report


@click.command("report")
@click.argument("run_dir")
@click.option("--window", nargs=2, type=click.FloatRange(min=0, min_open=True), default=None,
              help="Radii r_lo r_hi (r_hi >= 4 r_lo) over which alpha is read off.")
@click.option("--typeb-window", "typeb_window", nargs=2, type=click.FloatRange(min=0, min_open=True),
              default=None, help="xi range for the rescaled-convergence diagnostic.")
@click.option("--T", "T", type=click.FloatRange(min=0, min_open=True), default=None)
@guarded("report")
def report_cmd(run_dir: str, window, typeb_window, T: float | None) -> int:
    """Extract W and U from a blown-up run and write the alpha report."""
    run, summary = load_run(Path(run_dir))
    if run.termination is not Termination.BLOWUP_DETECTED:
        raise NotEnoughData(f"run ended {run.termination.value}; there is no final-time profile")

    analysis = read_json(Path(run_dir) / "config.json").get("analysis", {})
    window = tuple(window or analysis.get("window") or ()) or None
    typeb_window = tuple(typeb_window or analysis.get("typeB_window") or ()) or None
    T = blowup_time_for(run, summary, T)

    report, W = build_report(run, T, window=window, typeB_window=typeb_window,
                             samples=int(analysis.get("samples", 81)))
    path = save_report(report, W, Path(run_dir), T)
    logger.info("[report] %s alpha_U=%.6g alpha_W=%.6g -> %s", report.status,
                report.alpha_from_U, report.alpha_from_W, path)
    return EX_OK
