# kslab/services/schema.py
"""
Experiment files: JSON checked against kslab/schemas/experiment-v1.json,
then turned into grids, initial data and solver configs.
"""
from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any

from jsonschema import Draft202012Validator
from jsonschema.exceptions import best_match

from config import get_config
from kslab.errors import MissingInput, SchemaError
from kslab.models import Dimension, InitialData, RadialGrid, SnapshotSchedule, SolverConfig

_cfg = get_config()

SCHEMA_FILE = "experiment-v1.json"


@lru_cache(maxsize=1)
def experiment_schema() -> dict:
    text = resources.files("kslab").joinpath("schemas").joinpath(SCHEMA_FILE).read_text()
    return json.loads(text)


def _line_of(text: str, path) -> int:
    """Line of the deepest key on the path that can be found in the raw text."""
    pos = 0
    for part in path:
        if not isinstance(part, str):
            continue
        found = text.find(f'"{part}"', pos)
        if found < 0:
            break
        pos = found
    return text.count("\n", 0, pos) + 1


def validate_experiment(doc: Any, text: str = "") -> dict:
    validator = Draft202012Validator(experiment_schema())
    error = best_match(validator.iter_errors(doc))
    if error is not None:
        path = "/".join(str(p) for p in error.absolute_path)
        raise SchemaError(error.message, _line_of(text, error.absolute_path) if text else None, path or "/")
    return doc


def load_experiment(path: str | Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise MissingInput(f"no experiment file at {path}")
    text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as ex:
        raise SchemaError(f"not valid JSON: {ex.msg}", ex.lineno) from ex
    doc = validate_experiment(doc, text)
    doc.setdefault("name", path.stem)
    return doc


def build_grid(doc: dict) -> RadialGrid:
    spec = doc["grid"]
    kind = spec["kind"]
    if kind == "annulus":
        return RadialGrid.annulus(spec["r_min"], spec["r_max"], spec["cells"], spec.get("geometric", False))
    if kind == "logarithmic":
        return RadialGrid.logarithmic(spec["r_max"], spec["cells"], spec.get("h_min_ratio", 1e-4))
    return RadialGrid.uniform(spec["r_max"], spec["cells"])


def build_initial_data(doc: dict) -> InitialData:
    spec = dict(doc["initial_data"])
    family = spec.pop("family")
    require = spec.pop("require_nonincreasing", None)
    if family == "gaussian":
        data = InitialData.gaussian(spec["A"], spec.get("sigma", 1.0))
    elif family == "plateau":
        data = InitialData.plateau(spec["A"], spec["R0"], spec["width"])
    elif family == "remark39":
        data = InitialData.remark39(spec["k"], spec.get("tail_rate", 1.0), spec.get("tail_height", 1.0))
    elif family == "constant":
        data = InitialData.constant(spec["A"])
    else:
        data = InitialData.singular()
    if require is not None:
        data = InitialData(data.family, data.params, require)
    return data


def build_solver_config(doc: dict, grid: RadialGrid | None = None) -> SolverConfig:
    grid = grid or build_grid(doc)
    spec = doc.get("solver", {})
    annulus = grid.grading == "annulus"
    return SolverConfig(
        dim=Dimension(doc["dim"]),
        grid=grid,
        dt_safety=spec.get("dt_safety", _cfg.DT_SAFETY),
        blowup_threshold=spec.get("blowup_threshold", _cfg.BLOWUP_THRESHOLD),
        time_cap=spec.get("time_cap", 1.0),
        snapshot_radii=tuple(spec.get("snapshot_radii", ())),
        snapshot_schedule=SnapshotSchedule(tuple(spec.get("snapshot_times", ())), spec.get("snapshot_growth")),
        dt_max=spec.get("dt_max", _cfg.DT_MAX),
        inner_bc=spec.get("inner_bc", "dirichlet" if annulus else "symmetry"),
        outer_bc=spec.get("outer_bc", "zero_density"),
        steady_tol=spec.get("steady_tol", _cfg.STEADY_TOL),
        regrid_factor=spec.get("regrid_factor", _cfg.REGRID_FACTOR),
        max_steps=spec.get("max_steps", 2_000_000),
    )
