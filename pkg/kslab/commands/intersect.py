# kslab/commands/intersect.py
from __future__ import annotations

from pathlib import Path

import click

from kslab.commands import guarded
from kslab.errors import EX_INCONCLUSIVE, EX_OK, NotEnoughData
from kslab.extensions import logger
from kslab.models import BlowupRun, Classification
from kslab.services.profile_ode import build_profile
from kslab.services.radial import tail_coefficient
from kslab.services.solver import estimate_blowup_time
from kslab.services.storage import load_run, read_json, save_series, write_json
from kslab.services.zeronum import monotonicity_report
from kslab.types import IntersectSummary

# initial tails this close to m make the count at large r fragile
TAIL_MATCH = 0.01


def blowup_time_for(run, summary: dict, override: float | None) -> float:
    if override is not None:
        return float(override)
    if summary.get("T_est") is not None:
        return float(summary["T_est"])
    return estimate_blowup_time(run).T_est


def profile_list(run_dir: Path) -> list[float]:
    """The experiment's profiles.m list, read back from the stored config.json."""
    config = run_dir / "config.json"
    if not config.is_file():
        return []
    return [float(m) for m in read_json(config).get("profiles", {}).get("m", [])]


def intersect_run(run: BlowupRun, out: Path, m: float, T: float, tol: float | None = None) -> int:
    """Write zero_counts_m<m>.csv and intersect_m<m>.json for one profile."""
    profile = build_profile(m, run.config.dim)
    if profile.classification is Classification.INDETERMINATE:
        logger.warning("[intersect] profile m=%g is Indeterminate; no verdict", m)
        return EX_INCONCLUSIVE

    tail = tail_coefficient(run.snapshots[0].w)
    if abs(tail - m) <= TAIL_MATCH * m:
        logger.warning("[intersect] initial tail r^2 w0 ~ %.6g is within 1%% of m=%g", tail, m)

    report = monotonicity_report(run, profile, T, tol)
    if report.series.times.size == 0:
        raise NotEnoughData(f"no snapshots before T={T:.6g}")

    save_series(out / f"zero_counts_m{m:g}.csv", report.series)
    doc: IntersectSummary = {
        "m": m,
        "T": T,
        "passed": report.passed,
        "violations": [list(v) for v in report.violations],
        "tangency_candidates": list(report.tangency_candidates),
        "tail_one_signed": list(report.tail_one_signed),
        "tail_coefficient": tail,
    }
    write_json(out / f"intersect_m{m:g}.json", doc)
    logger.info("[intersect] m=%g T=%.8g snapshots=%d verdict=%s", m, T, report.series.times.size,
                "nonincreasing" if report.passed else f"{len(report.violations)} increase(s)")
    return EX_OK


@click.command("intersect")
@click.argument("run_dir")
@click.option("--m", "ms", type=click.FloatRange(min=0, min_open=True), multiple=True,
              help="Tail coefficient; repeatable. Defaults to the experiment's profiles.m list.")
@click.option("--T", "T", type=click.FloatRange(min=0, min_open=True), default=None,
              help="Blow-up time; defaults to the run's own estimate.")
@click.option("--tol", type=click.FloatRange(min=0), default=None)
@guarded("intersect")
def intersect_cmd(run_dir: str, ms: tuple[float, ...], T: float | None, tol: float | None) -> int:
    """Count intersections of a stored run with the rescaled profiles of tail m."""
    out = Path(run_dir)
    run, summary = load_run(out)
    ms = ms or tuple(profile_list(out))
    if not ms:
        raise click.UsageError("no --m given and the experiment lists no profiles.m")
    T = blowup_time_for(run, summary, T)
    return max(intersect_run(run, out, m, T, tol) for m in ms)
