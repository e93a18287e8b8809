# tests/conftest.py
import json
import os

os.environ["KSLAB_ENV"] = "testing"

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from kslab.models import (  # noqa: E402
    BlowupRun,
    Classification,
    Dimension,
    RadialField,
    RadialGrid,
    SelfSimilarProfile,
    SolverConfig,
    Termination,
    TailCoefficient,
)


@pytest.fixture
def dim3():
    return Dimension(3)


@pytest.fixture
def singular_profile(dim3):
    """phi = 2 / xi^2, the m = 2 profile, sampled analytically."""
    xi = np.geomspace(1e3, 1e-3, 3000)
    return SelfSimilarProfile(
        TailCoefficient(2.0), dim3, 0.0, Classification.UNBOUNDED, xi, 2.0 / xi ** 2, np.inf,
        dphi_values=-4.0 / xi ** 3, diagnostics={"power": 2.0},
    )


def frozen_run(dim: Dimension, grid: RadialGrid, w_of_r, times=(0.9, 0.95, 0.99)) -> BlowupRun:
    """A run whose snapshots are given in closed form; w_of_r(r, tau) with tau = 1 - t."""
    cfg = SolverConfig(dim, grid, inner_bc="dirichlet" if grid.grading == "annulus" else "symmetry",
                       outer_bc="dirichlet", regrid_factor=None)
    snapshots = [(t, RadialField(grid, w_of_r(grid.nodes, 1.0 - t), t)) for t in times]
    sup = [float(np.max(w.values)) * dim.N for _, w in snapshots]
    return BlowupRun(
        config=cfg,
        snapshots=snapshots,
        supnorm_times=np.array(times),
        supnorm_values=np.array(sup),
        mass_values=np.ones(len(times)),
        termination=Termination.BLOWUP_DETECTED,
    )


@pytest.fixture
def write_experiment(tmp_path):
    def _write(doc: dict, name: str = "exp.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc, indent=2))
        return path
    return _write


@pytest.fixture
def homogeneous_doc():
    def _doc(A: float, name: str = "homogeneous") -> dict:
        return {
            "schema_version": 1,
            "name": name,
            "dim": 3,
            "grid": {"kind": "uniform", "r_max": 1.0, "cells": 32},
            "initial_data": {"family": "constant", "A": A},
            "solver": {"outer_bc": "neumann", "time_cap": 0.5, "regrid_factor": None},
        }
    return _doc


@pytest.fixture
def make_frozen_run():
    return frozen_run
