# kslab/commands/simulate.py
from __future__ import annotations

from pathlib import Path

import click

from config import get_config
from kslab.commands import guarded
from kslab.errors import EX_OK, EstimateUnreliable
from kslab.extensions import logger
from kslab.models import Termination
from kslab.services.analysis import blowup_set_heuristic
from kslab.services.schema import build_grid, build_initial_data, build_solver_config, load_experiment
from kslab.services.solver import estimate_blowup_time, initial_w, run
from kslab.services.storage import save_run


def run_dir_for(doc: dict, out_root: str | Path | None = None) -> Path:
    root = Path(out_root or doc.get("output_dir") or get_config().OUTPUT_DIR)
    return root / doc["name"]


def simulate_experiment(config_path: str | Path, out_root: str | Path | None = None) -> Path:
    """Validate, run and store one experiment file; returns the run directory."""
    doc = load_experiment(config_path)
    grid = build_grid(doc)
    cfg = build_solver_config(doc, grid)
    w0 = initial_w(build_initial_data(doc), grid, cfg.dim)

    result = run(cfg, w0)
    estimate = None
    if result.termination is Termination.BLOWUP_DETECTED:
        try:
            estimate = estimate_blowup_time(result)
        except EstimateUnreliable as ex:
            logger.warning("[simulate] %s: no blow-up time estimate (%s)", doc["name"], ex)

    target = run_dir_for(doc, out_root)
    save_run(result, target, doc, estimate, blowup_set_heuristic(result))
    logger.info("[simulate] %s: %s T_est=%s -> %s", doc["name"], result.termination.value,
                f"{estimate.T_est:.8g}" if estimate else "n/a", target)
    return target


@click.command("simulate")
@click.argument("config_path")
@click.option("--out", "out_root", type=click.Path(file_okay=False), default=None,
              help="Parent directory for the run directory (defaults to output_dir or KSLAB_OUTPUT_DIR).")
@guarded("simulate")
def simulate_cmd(config_path: str, out_root: str | None) -> int:
    """Run the experiment described by CONFIG_PATH."""
    simulate_experiment(config_path, out_root)
    return EX_OK
