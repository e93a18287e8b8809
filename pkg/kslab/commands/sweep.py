# kslab/commands/sweep.py
from __future__ import annotations

from concurrent.futures import as_completed
from pathlib import Path

import click

from config import get_config
from kslab.commands import guarded
from kslab.commands.intersect import intersect_run, profile_list
from kslab.commands.simulate import simulate_experiment
from kslab.errors import EX_OK, exit_code_for
from kslab.extensions import logger, worker_pool
from kslab.services.storage import load_run, write_json
from kslab.types import SweepRow


def intersect_listed(target: Path) -> int:
    """Intersection counts for the experiment's profiles.m list, when the run has a blow-up time."""
    ms = profile_list(target)
    if not ms:
        return EX_OK
    run, summary = load_run(target)
    if summary.get("T_est") is None:
        logger.warning("[sweep] %s: no blow-up time estimate; profiles.m skipped", target.name)
        return EX_OK
    return max(intersect_run(run, target, m, float(summary["T_est"])) for m in ms)


def sweep_one(config_path: str, out_root: str | None) -> SweepRow:
    """One experiment inside a worker. Failures come back as rows, never as exceptions."""
    try:
        target = simulate_experiment(config_path, out_root)
        code = intersect_listed(target)
        return {"name": Path(config_path).stem, "exit_code": code, "output": str(target), "message": ""}
    except Exception as ex:
        return {"name": Path(config_path).stem, "exit_code": exit_code_for(ex), "output": "", "message": str(ex)}


@click.command("sweep")
@click.argument("config_paths", nargs=-1, required=True)
@click.option("--out", "out_root", type=click.Path(file_okay=False), default=None)
@click.option("--threads", type=click.IntRange(min=1), default=None,
              help="Worker count; never more than KSLAB_THREADS.")
@guarded("sweep")
def sweep_cmd(config_paths: tuple[str, ...], out_root: str | None, threads: int | None) -> int:
    """Run independent experiment files in parallel workers."""
    cfg = get_config()
    cap = cfg.THREADS if threads is None else min(threads, cfg.THREADS)
    workers = max(1, min(cap, len(config_paths)))
    logger.info("[sweep] %d experiment(s) on %d worker(s)", len(config_paths), workers)

    rows: list[SweepRow] = []
    with worker_pool(workers) as pool:
        futures = {pool.submit(sweep_one, path, out_root): path for path in config_paths}
        for future in as_completed(futures):
            row = future.result()
            if row["exit_code"] != EX_OK:
                logger.error("[sweep] %s failed (exit %d): %s", row["name"], row["exit_code"], row["message"])
            rows.append(row)

    rows.sort(key=lambda row: row["name"])
    write_json(Path(out_root or cfg.OUTPUT_DIR) / "sweep.json", {"runs": rows})
    return max((row["exit_code"] for row in rows), default=EX_OK)
