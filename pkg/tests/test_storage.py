# tests/test_storage.py
import numpy as np
import pytest

from kslab.errors import MissingInput, SchemaError
from kslab.models import InitialData, RadialField, RadialGrid, SnapshotSchedule, SolverConfig, Termination
from kslab.services.schema import build_grid, build_initial_data, build_solver_config, load_experiment
from kslab.services.solver import estimate_blowup_time, initial_w, run
from kslab.services.storage import (
    load_run,
    read_columns,
    read_field,
    read_json,
    save_run,
    write_columns,
    write_field,
    write_json,
)


@pytest.fixture
def blowup(dim3):
    grid = RadialGrid.uniform(1.0, 32)
    cfg = SolverConfig(dim3, grid, outer_bc="neumann", regrid_factor=None, snapshot_radii=(0.0, 0.5),
                       snapshot_schedule=SnapshotSchedule((0.05,), growth_factor=10.0))
    return run(cfg, initial_w(InitialData.constant(10.0), grid, dim3))


def test_csv_stamp_and_header(tmp_path):
    path = write_columns(tmp_path / "a.csv", ["t", "supnorm"], [np.array([0.0, 0.1]), np.array([1.0, 1.0 / 3.0])])
    lines = path.read_text().splitlines()
    assert lines[0] == "# kslab 0.1.0"
    assert lines[1] == "t,supnorm"
    assert lines[3] == "0.10000000000000001,0.33333333333333331"
    header, body = read_columns(path)
    assert header == ["t", "supnorm"]
    assert body[1, 1] == 1.0 / 3.0


def test_field_round_trip(tmp_path):
    grid = RadialGrid.annulus(0.5, 2.0, 20)
    field = RadialField(grid, np.sqrt(grid.nodes), 0.25)
    back = read_field(write_field(tmp_path / "f.csv", field))
    assert back.grid.grading == "annulus"
    assert np.array_equal(back.values, field.values)
    assert back.time == 0.25
    assert read_field(write_field(tmp_path / "g.csv", RadialField(grid, field.values))).time is None


def test_json_nulls_and_sorting(tmp_path):
    path = write_json(tmp_path / "x.json", {"b": np.inf, "a": np.float64(np.nan), "c": np.arange(2), "d": Termination.TIME_CAP})
    text = path.read_text()
    assert text.index('"a"') < text.index('"b"')
    assert read_json(path) == {"a": None, "b": None, "c": [0, 1], "d": "TimeCap"}


def test_missing_files(tmp_path):
    with pytest.raises(MissingInput):
        read_columns(tmp_path / "none.csv")
    with pytest.raises(MissingInput):
        read_json(tmp_path / "none.json")
    with pytest.raises(MissingInput):
        load_run(tmp_path / "no_run")


def test_run_round_trip(tmp_path, blowup):
    estimate = estimate_blowup_time(blowup)
    save_run(blowup, tmp_path / "run", {"name": "run"}, estimate)
    back, summary = load_run(tmp_path / "run")

    assert summary["termination"] == "BlowupDetected"
    assert summary["T_est"] == pytest.approx(0.1, rel=1e-2)
    assert back.termination is Termination.BLOWUP_DETECTED
    assert [s.t for s in back.snapshots] == [s.t for s in blowup.snapshots]
    assert all(np.array_equal(a.w.values, b.w.values) for a, b in zip(back.snapshots, blowup.snapshots))
    assert np.array_equal(back.supnorm_values, blowup.supnorm_values)
    assert np.array_equal(back.tracked_values, blowup.tracked_values)
    assert back.config.grid.same_nodes(blowup.config.grid)
    assert back.config.outer_bc == "neumann"
    assert back.config.snapshot_schedule == blowup.config.snapshot_schedule
    assert read_json(tmp_path / "run" / "config.json") == {"name": "run"}


def test_reruns_are_byte_identical(tmp_path, dim3, blowup):
    again = run(blowup.config, initial_w(InitialData.constant(10.0), blowup.config.grid, dim3))
    save_run(blowup, tmp_path / "one")
    save_run(again, tmp_path / "two")
    for name in ("supnorm.csv", "tracked.csv", "run.json", "grid.json", "snapshots/snapshot_0001.csv"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()


def test_saving_twice_replaces_old_snapshots(tmp_path, blowup):
    target = tmp_path / "run"
    (target / "snapshots").mkdir(parents=True)
    (target / "snapshots" / "snapshot_9999.csv").write_text("stale")
    save_run(blowup, target)
    assert len(list((target / "snapshots").glob("*.csv"))) == len(blowup.snapshots)


def test_valid_experiment(write_experiment, homogeneous_doc):
    doc = load_experiment(write_experiment(homogeneous_doc(10.0, "hom10")))
    grid = build_grid(doc)
    cfg = build_solver_config(doc, grid)
    assert doc["name"] == "hom10"
    assert grid.cells == 32
    assert cfg.outer_bc == "neumann"
    assert cfg.regrid_factor is None
    assert build_initial_data(doc) == InitialData.constant(10.0)


def test_name_defaults_to_file_stem(write_experiment, homogeneous_doc):
    doc = homogeneous_doc(1.0)
    del doc["name"]
    assert load_experiment(write_experiment(doc, "stemmed.json"))["name"] == "stemmed"


def test_annulus_defaults_to_dirichlet_inner(write_experiment):
    path = write_experiment({
        "schema_version": 1,
        "dim": 4,
        "grid": {"kind": "annulus", "r_min": 0.5, "r_max": 2.0, "cells": 32},
        "initial_data": {"family": "singular"},
    })
    doc = load_experiment(path)
    cfg = build_solver_config(doc)
    assert cfg.inner_bc == "dirichlet"
    assert cfg.dim.N == 4


def test_missing_dimension(write_experiment, homogeneous_doc):
    doc = homogeneous_doc(1.0)
    del doc["dim"]
    with pytest.raises(SchemaError) as info:
        load_experiment(write_experiment(doc))
    assert "dim" in str(info.value)
    assert info.value.path == "/"


def test_schema_error_points_at_the_line(write_experiment, homogeneous_doc):
    doc = homogeneous_doc(1.0)
    doc["grid"]["cells"] = 10
    path = write_experiment(doc)
    expected = next(i for i, line in enumerate(path.read_text().splitlines(), 1) if '"cells"' in line)
    with pytest.raises(SchemaError) as info:
        load_experiment(path)
    assert info.value.path == "grid/cells"
    assert info.value.line == expected


def test_invalid_json_and_missing_file(tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text('{\n  "dim": 3,\n  "grid": \n}\n')
    with pytest.raises(SchemaError) as info:
        load_experiment(broken)
    assert info.value.line == 4
    with pytest.raises(MissingInput):
        load_experiment(tmp_path / "absent.json")


def test_unknown_keys_are_rejected(write_experiment, homogeneous_doc):
    doc = homogeneous_doc(1.0)
    doc["solver"]["cfl"] = 0.5
    with pytest.raises(SchemaError) as info:
        load_experiment(write_experiment(doc))
    assert info.value.path == "solver"


def test_profiles_list(write_experiment, homogeneous_doc):
    doc = homogeneous_doc(1.0)
    doc["profiles"] = {"m": [0.5, 1.0, 3.0]}
    assert load_experiment(write_experiment(doc))["profiles"]["m"] == [0.5, 1.0, 3.0]

    doc["profiles"] = {"m": [1.0, 0.0]}
    with pytest.raises(SchemaError) as info:
        load_experiment(write_experiment(doc))
    assert info.value.path == "profiles/m/1"

    doc["profiles"] = {"m": []}
    with pytest.raises(SchemaError):
        load_experiment(write_experiment(doc))
