# tests/test_initial_data.py
import numpy as np
import pytest
from scipy.integrate import quad

from kslab.errors import InvalidConfig, InvalidInitialData
from kslab.models import Dimension, InitialData, RadialGrid
from kslab.services.initial_data import build_initial, inner_mass, profile_function, remark39_bridge


def test_remark39_value_at_half(dim3):
    grid = RadialGrid.uniform(4.0, 64)
    u0 = build_initial(InitialData.remark39(64.0), grid, dim3)
    half = int(np.argmin(np.abs(grid.nodes - 0.5)))
    assert u0.values[half] == pytest.approx(1.0)


def test_remark39_bridge_is_smooth_and_positive():
    a, b, c = remark39_bridge(1.0, 1.0)
    x = np.linspace(1e-6, 1.0, 200)
    bridge = x ** 3 * (a + b * x + c * x ** 2)
    assert np.all(bridge > 0.0)
    assert a + b + c == pytest.approx(1.0)
    assert 3 * a + 4 * b + 5 * c == pytest.approx(-1.0)


def test_gaussian_and_plateau_peaks(dim3):
    grid = RadialGrid.uniform(5.0, 100)
    assert build_initial(InitialData.gaussian(3.0, 0.5), grid, dim3).values[0] == 3.0
    plateau = build_initial(InitialData.plateau(2.0, 1.0, 0.5), grid, dim3)
    inside = grid.nodes < 0.9
    assert np.all(plateau.values[inside] == 2.0)
    assert plateau.values[-1] == 0.0


def test_negative_parameters_are_rejected(dim3):
    grid = RadialGrid.uniform(1.0, 16)
    with pytest.raises(InvalidInitialData):
        build_initial(InitialData.gaussian(-1.0), grid, dim3)
    with pytest.raises(InvalidInitialData):
        build_initial(InitialData.plateau(1.0, 1.0, 0.0), grid, dim3)


def test_unknown_family():
    with pytest.raises(InvalidConfig):
        InitialData("lognormal", {})


def test_singular_state_needs_annulus(dim3):
    with pytest.raises(InvalidInitialData):
        build_initial(InitialData.singular(), RadialGrid.uniform(1.0, 16), dim3)
    u0 = build_initial(InitialData.singular(), RadialGrid.annulus(0.5, 1.0, 16), dim3)
    assert u0.values[0] == pytest.approx(8.0)


@pytest.mark.parametrize("N", [3, 4, 5])
@pytest.mark.parametrize("data", [
    InitialData.gaussian(2.0, 0.7),
    InitialData.plateau(1.5, 0.4, 0.3),
    InitialData.remark39(16.0),
])
def test_inner_mass_matches_quadrature(N, data):
    dim = Dimension(N)
    f = profile_function(data, dim)
    r_min = 1.3
    expected, _ = quad(lambda s: s ** (N - 1) * float(f(s)), 0.0, r_min, points=[0.4, 0.7, 1.0], limit=200)
    assert inner_mass(data, r_min, dim) == pytest.approx(expected, rel=1e-8)


def test_inner_mass_closed_forms(dim3):
    assert inner_mass(InitialData.constant(3.0), 2.0, dim3) == pytest.approx(8.0)
    assert inner_mass(InitialData.singular(), 2.0, dim3) == pytest.approx(4.0)
    assert inner_mass(InitialData.gaussian(1.0), 0.0, dim3) == 0.0
