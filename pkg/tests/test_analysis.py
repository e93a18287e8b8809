# tests/test_analysis.py
import numpy as np
import pytest

from kslab.errors import InvalidConfig, InvalidWindow, NotEnoughData
from kslab.models import Dimension, InitialData, RadialField, RadialGrid, SnapshotSchedule, SolverConfig
from kslab.services.analysis import (
    alpha_estimates,
    blowup_set_heuristic,
    build_report,
    default_window,
    extract_U,
    extract_W,
    regularity_diagnostics,
    typeB_diagnostic,
)
from kslab.services.solver import initial_w, run

SINGULAR_GRID = RadialGrid.annulus(0.01, 10.0, 400, geometric=True)


def singular(r, tau):
    return 2.0 / r ** 2


def homogeneous_run(dim, u0=10.0, radii=()):
    grid = RadialGrid.uniform(1.0, 32)
    cfg = SolverConfig(dim, grid, outer_bc="neumann", regrid_factor=None, snapshot_radii=radii,
                       snapshot_schedule=SnapshotSchedule(growth_factor=10.0))
    return run(cfg, initial_w(InitialData.constant(u0), grid, dim))


@pytest.mark.parametrize("N", [3, 4, 5])
def test_singular_state_gives_alpha(N, make_frozen_run):
    dim = Dimension(N)
    frozen = make_frozen_run(dim, SINGULAR_GRID, singular)
    radii = SINGULAR_GRID.nodes[100:300]
    W = extract_W(frozen, 1.0, radii)
    assert np.allclose(W.field.values, 2.0 / radii ** 2, rtol=1e-12)
    assert W.converged.all()

    U = extract_U(W.field, dim)
    assert np.allclose(U.values, 2.0 * (N - 2) / radii ** 2, rtol=1e-8)

    report = alpha_estimates(W.field, U, dim, (0.1, 1.0))
    assert report.alpha_from_U == pytest.approx(2.0 * (N - 2), abs=1e-6)
    assert report.alpha_from_W == pytest.approx(2.0 * (N - 2), abs=1e-6)
    assert report.status == "Converged"
    assert report.plateau_ratio == pytest.approx(1.0, abs=1e-6)


def test_linear_approach_extrapolates_exactly(dim3, make_frozen_run):
    frozen = make_frozen_run(dim3, SINGULAR_GRID, lambda r, tau: 2.0 / r ** 2 + tau / r)
    radii = SINGULAR_GRID.nodes[60:340:4]
    W = extract_W(frozen, 1.0, radii)
    assert np.allclose(W.field.values, 2.0 / radii ** 2, rtol=1e-9)
    assert W.converged.all()


def test_homogeneous_blowup_never_settles(dim3):
    result = homogeneous_run(dim3)
    W = extract_W(result, 0.1, [0.1, 0.5, 0.9])
    assert not W.converged.any()


def test_extract_W_input_checks(dim3, make_frozen_run):
    frozen = make_frozen_run(dim3, SINGULAR_GRID, singular)
    with pytest.raises(NotEnoughData):
        extract_W(frozen, 0.92, [0.1, 1.0])
    with pytest.raises(InvalidConfig):
        extract_W(frozen, 1.0, [1.0, 0.5])
    with pytest.raises(InvalidConfig):
        extract_W(frozen, 1.0, [0.5, 20.0])


def test_extract_U_on_constants_and_scaling(dim3):
    grid = RadialGrid.annulus(0.5, 4.0, 64)
    constant = RadialField(grid, np.full(grid.size, 0.7))
    assert np.allclose(extract_U(constant, dim3).values, 2.1)

    base = RadialField(grid, 1.0 / (1.0 + grid.nodes ** 2))
    scaled = RadialField(grid, 3.0 * base.values)
    assert np.allclose(extract_U(scaled, dim3).values, 3.0 * extract_U(base, dim3).values)


def test_alpha_window_checks(dim3):
    grid = RadialGrid.annulus(0.5, 4.0, 64)
    W = RadialField(grid, 2.0 / grid.nodes ** 2)
    U = extract_U(W, dim3)
    with pytest.raises(InvalidWindow):
        alpha_estimates(W, U, dim3, (1.0, 3.0))
    with pytest.raises(InvalidWindow):
        alpha_estimates(W, U, dim3, (0.0, 1.0))


def test_mismatched_estimates_are_unconverged(dim3):
    grid = RadialGrid.annulus(0.5, 4.0, 64)
    W = RadialField(grid, 2.0 / grid.nodes ** 2)
    U = RadialField(grid, 3.0 / grid.nodes ** 2)
    report = alpha_estimates(W, U, dim3, (0.5, 4.0))
    assert report.alpha_from_U == pytest.approx(3.0)
    assert report.alpha_from_W == pytest.approx(2.0)
    assert report.status == "Unconverged"


@pytest.mark.parametrize("geometric", [False, True])
@pytest.mark.parametrize("N", [3, 4, 5])
def test_regularity_of_the_singular_state(N, geometric, make_frozen_run):
    frozen = make_frozen_run(Dimension(N), RadialGrid.annulus(1.0, 2.0, 200, geometric=geometric), singular)
    diag = regularity_diagnostics(frozen, Dimension(N))
    # w_rr = 12 / r^4 > 0 and r^3 (-u_r) = 4 (N - 2)
    assert diag.c4 == 0.0
    assert diag.c3 == pytest.approx(4.0 * (N - 2), rel=1e-3)
    assert len(diag.c3_series) == 3


def test_typeB_for_a_selfsimilar_run(dim3, make_frozen_run):
    frozen = make_frozen_run(dim3, SINGULAR_GRID, singular)
    assert typeB_diagnostic(frozen, 1.0, (1.0, 5.0)) <= 1e-2
    with pytest.raises(InvalidWindow):
        typeB_diagnostic(frozen, 1.0, (1.0, 500.0))
    with pytest.raises(NotEnoughData):
        typeB_diagnostic(frozen, 0.96, (1.0, 5.0))


def test_typeB_sees_growth_beyond_selfsimilar(dim3, make_frozen_run):
    # tau u(sqrt(tau) xi) ~ tau^-1/4 keeps growing
    frozen = make_frozen_run(dim3, SINGULAR_GRID, lambda r, tau: 2.0 / r ** 2 * tau ** -0.25)
    assert typeB_diagnostic(frozen, 1.0, (1.0, 5.0)) > 1.0


def test_build_report_on_the_singular_state(dim3, make_frozen_run):
    frozen = make_frozen_run(dim3, SINGULAR_GRID, singular)
    report, W = build_report(frozen, 1.0, window=(0.1, 1.0), typeB_window=(1.0, 5.0))
    assert report.alpha_from_U == pytest.approx(2.0, rel=1e-2)
    assert report.alpha_from_W == pytest.approx(2.0, rel=1e-2)
    assert report.status == "Converged"
    assert report.regularity.c4 == 0.0
    assert report.typeB_cauchy <= 1e-2
    assert report.single_point["single_point"] is None
    assert W.field.grid.size == 81
    with pytest.raises(InvalidWindow):
        build_report(frozen, 1.0, window=(0.5, 1.0))


def test_default_window():
    grid = RadialGrid.uniform(8.0, 128)
    cfg = SolverConfig(Dimension(3), grid, time_cap=1e-3, regrid_factor=None)
    result = run(cfg, initial_w(InitialData.gaussian(1.0), grid, Dimension(3)))
    assert default_window(result) == pytest.approx((0.25, 0.8))


def test_homogeneous_blowup_is_not_single_point(dim3):
    result = homogeneous_run(dim3, radii=(0.0, 0.5))
    heuristic = blowup_set_heuristic(result)
    assert heuristic["radii"] == [0.0, 0.5]
    assert heuristic["single_point"] is False
