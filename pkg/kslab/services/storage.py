# kslab/services/storage.py
"""
Run directories and result files. CSV files start with a version stamp
comment, then a header line; numbers are written with %.17g so re-running a
deterministic command reproduces the bodies byte for byte.
"""
from __future__ import annotations

import json
import math
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from config import get_config
from kslab.errors import MissingInput
from kslab.models import (
    BlowupEstimate,
    BlowupRun,
    Dimension,
    ExtrapolatedField,
    ProfileReport,
    RadialField,
    RadialGrid,
    SelfSimilarProfile,
    Snapshot,
    SnapshotSchedule,
    SolverConfig,
    Termination,
    ZeroCountSeries,
)
from kslab.types import GridDoc, ProfileSidecar, ReportDoc, RunSummary

_cfg = get_config()


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def write_columns(path: Path, header: Sequence[str], columns: Sequence[np.ndarray]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns]) if columns else np.empty((0, 0))
    np.savetxt(path, data, fmt="%.17g", delimiter=",",
               header=f"# {_cfg.VERSION_STAMP}\n{','.join(header)}", comments="")
    return path


def read_columns(path: Path) -> tuple[list[str], np.ndarray]:
    path = Path(path)
    if not path.is_file():
        raise MissingInput(f"missing file {path}")
    lines = [ln for ln in path.read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise MissingInput(f"{path} has no header")
    header = lines[0].split(",")
    body = np.loadtxt(lines[1:], delimiter=",", ndmin=2) if len(lines) > 1 else np.empty((0, len(header)))
    return header, body


def _plain(value: Any) -> Any:
    """JSON-safe copy: numpy scalars and arrays unwrapped, non-finite floats to null."""
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def write_json(path: Path, payload: Mapping[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_plain(payload), sort_keys=True, indent=2) + "\n")
    return path


def read_json(path: Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise MissingInput(f"missing file {path}")
    return json.loads(path.read_text())


# ---------------------------------------------------------------------------
# fields and profiles
# ---------------------------------------------------------------------------

def write_field(path: Path, field: RadialField) -> Path:
    if field.time is None:
        return write_columns(path, ["r", "value"], [field.r, field.values])
    return write_columns(path, ["r", "value", "t"], [field.r, field.values, np.full(field.grid.size, field.time)])


def read_field(path: Path) -> RadialField:
    header, body = read_columns(path)
    time = float(body[0, 2]) if "t" in header and body.size else None
    return RadialField(RadialGrid.from_nodes(body[:, 0]), body[:, 1], time)


def grid_doc(grid: RadialGrid) -> GridDoc:
    return {"nodes": grid.nodes.tolist(), "grading": grid.grading}


def profile_sidecar(profile: SelfSimilarProfile) -> ProfileSidecar:
    return {
        "m": profile.m.m,
        "N": profile.dim.N,
        "ell": profile.ell,
        "classification": profile.classification.value,
        "tail_error": profile.tail_error,
        "extension_value": profile.extension_value,
        "residual": profile.diagnostics.get("residual"),
        "flux_mismatch": profile.diagnostics.get("flux_mismatch"),
    }


def save_profile(profile: SelfSimilarProfile, out_dir: Path, stem: str) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    csv_path = write_columns(out_dir / f"{stem}.csv", ["xi", "phi"], [profile.xi_samples, profile.phi_values])
    json_path = write_json(out_dir / f"{stem}.json", profile_sidecar(profile))
    return csv_path, json_path


def save_series(path: Path, series: ZeroCountSeries) -> Path:
    return write_columns(path, ["t", "count", "ambiguous"], [series.times, series.counts, series.ambiguous])


# ---------------------------------------------------------------------------
# run directories
# ---------------------------------------------------------------------------

def _solver_doc(cfg: SolverConfig) -> dict:
    return {
        "dt_safety": cfg.dt_safety,
        "blowup_threshold": cfg.blowup_threshold,
        "time_cap": cfg.time_cap,
        "dt_max": cfg.dt_max,
        "snapshot_radii": list(cfg.snapshot_radii),
        "snapshot_times": list(cfg.snapshot_schedule.times),
        "snapshot_growth": cfg.snapshot_schedule.growth_factor,
        "inner_bc": cfg.inner_bc,
        "outer_bc": cfg.outer_bc,
        "steady_tol": cfg.steady_tol,
        "regrid_factor": cfg.regrid_factor,
        "max_steps": cfg.max_steps,
    }


def run_summary(run: BlowupRun, estimate: BlowupEstimate | None, blowup_set: dict | None = None) -> RunSummary:
    return {
        "termination": run.termination.value,
        "T_est": estimate.T_est if estimate else None,
        "fit_residual": estimate.fit_residual if estimate else None,
        "mass_drift": run.mass_drift(),
        "aborted": run.aborted,
        "message": run.message,
        "N": run.config.dim.N,
        "final_time": float(run.supnorm_times[-1]),
        "snapshots": len(run.snapshots),
        "blowup_set": blowup_set,
    }


def save_run(run: BlowupRun, run_dir: Path, experiment: Mapping[str, Any] | None = None,
             estimate: BlowupEstimate | None = None, blowup_set: dict | None = None) -> Path:
    run_dir = Path(run_dir)
    snap_dir = run_dir / "snapshots"
    snap_dir.mkdir(parents=True, exist_ok=True)
    for old in snap_dir.glob("snapshot_*.csv"):
        old.unlink()

    write_columns(run_dir / "supnorm.csv", ["t", "supnorm", "mass"],
                  [run.supnorm_times, run.supnorm_values, run.mass_values])
    for k, snap in enumerate(run.snapshots):
        write_field(snap_dir / f"snapshot_{k:04d}.csv", snap.w)
    if run.tracked_values is not None:
        radii = list(run.config.snapshot_radii)
        write_columns(run_dir / "tracked.csv", ["t"] + [f"u@{r:g}" for r in radii],
                      [run.supnorm_times] + [run.tracked_values[:, j] for j in range(len(radii))])

    write_json(run_dir / "grid.json", grid_doc(run.config.grid))
    write_json(run_dir / "config.json", dict(experiment or {}))
    summary = dict(run_summary(run, estimate, blowup_set))
    summary["solver"] = _solver_doc(run.config)
    write_json(run_dir / "run.json", summary)
    return run_dir


def load_run(run_dir: Path) -> tuple[BlowupRun, dict]:
    """Rebuild a BlowupRun from its directory; returns the run and its run.json summary."""
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise MissingInput(f"no run directory at {run_dir}")
    summary = read_json(run_dir / "run.json")
    grid_json = read_json(run_dir / "grid.json")
    snap_files = sorted((run_dir / "snapshots").glob("snapshot_*.csv"))
    if not snap_files:
        raise MissingInput(f"{run_dir} has no snapshots")

    _, history = read_columns(run_dir / "supnorm.csv")
    tracked_values = None
    if (run_dir / "tracked.csv").is_file():
        _, tracked = read_columns(run_dir / "tracked.csv")
        tracked_values = tracked[:, 1:]

    solver = summary.get("solver", {})
    grid = RadialGrid(grid_json["nodes"], grid_json["grading"])
    cfg = SolverConfig(
        dim=Dimension(summary["N"]),
        grid=grid,
        dt_safety=solver.get("dt_safety", 0.1),
        blowup_threshold=solver.get("blowup_threshold") or 1e8,
        time_cap=solver.get("time_cap", 1.0),
        snapshot_radii=tuple(solver.get("snapshot_radii", ())),
        snapshot_schedule=SnapshotSchedule(tuple(solver.get("snapshot_times", ())), solver.get("snapshot_growth")),
        dt_max=solver.get("dt_max", 1e-3),
        inner_bc=solver.get("inner_bc", "symmetry"),
        outer_bc=solver.get("outer_bc", "zero_density"),
        steady_tol=solver.get("steady_tol", 1e-10),
        regrid_factor=solver.get("regrid_factor"),
        max_steps=solver.get("max_steps", 2_000_000),
    )
    snapshots = []
    for path in snap_files:
        field = read_field(path)
        snapshots.append(Snapshot(field.time, field))

    run = BlowupRun(
        config=cfg,
        snapshots=tuple(snapshots),
        supnorm_times=history[:, 0],
        supnorm_values=history[:, 1],
        mass_values=history[:, 2],
        termination=Termination(summary["termination"]),
        tracked_values=tracked_values,
        aborted=bool(summary.get("aborted", False)),
        message=summary.get("message", ""),
    )
    return run, summary


def save_report(report: ProfileReport, W: ExtrapolatedField, out_dir: Path, T: float) -> Path:
    out_dir = Path(out_dir)
    r = report.radii
    write_columns(out_dir / "profile_W.csv", ["r", "value", "r2value"], [r, report.W_values, r * r * report.W_values])
    write_columns(out_dir / "profile_U.csv", ["r", "value", "r2value"], [r, report.U_values, r * r * report.U_values])
    regularity = None
    if report.regularity is not None:
        reg = report.regularity
        regularity = {"c4": reg.c4, "c3": reg.c3, "times": reg.times,
                      "c4_series": reg.c4_series, "c3_series": reg.c3_series}
    doc: ReportDoc = {
        "status": report.status,
        "alpha_from_U": report.alpha_from_U,
        "alpha_from_W": report.alpha_from_W,
        "plateau_ratio": report.plateau_ratio,
        "mismatch": report.mismatch,
        "window": list(report.window),
        "r2U_min": report.r2U_min,
        "r2U_max": report.r2U_max,
        "regularity": regularity,
        "typeB_cauchy": report.typeB_cauchy,
        "T": T,
    }
    payload = dict(doc)
    payload["single_point"] = report.single_point
    payload["extrapolation"] = {
        "converged_fraction": float(np.mean(W.converged)) if W.converged.size else 0.0,
        "max_residual": float(np.max(W.residual)) if W.residual.size else 0.0,
        "points": W.n_points,
    }
    return write_json(out_dir / "report.json", payload)
