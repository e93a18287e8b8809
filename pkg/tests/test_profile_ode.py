# tests/test_profile_ode.py
import numpy as np
import pytest

from kslab.errors import InvalidConfig, SingularDenominator, TooCoarse
from kslab.models import Classification, Dimension, SelfSimilarProfile, TailCoefficient
from kslab.services.profile_ode import (
    NEAR_ELL_SAMPLES,
    F_rhs,
    build_profile,
    continue_phi,
    evaluate_profile,
    phi_from_V,
    residual_phi,
    solve_V_ivp,
    weighted_flux_check,
)


def analytic(xi, phi, dim=Dimension(3), m=2.0):
    return SelfSimilarProfile(TailCoefficient(m), dim, 0.0, Classification.INDETERMINATE, xi, phi, np.inf)


def test_tail_coefficient_must_be_positive():
    with pytest.raises(InvalidConfig):
        TailCoefficient(-1.0)
    with pytest.raises(InvalidConfig):
        TailCoefficient(0.0)


@pytest.mark.parametrize("N", [3, 4, 5])
@pytest.mark.parametrize("m", [0.5, 1.0, 3.0])
def test_F_vanishes_at_origin(N, m):
    assert F_rhs(m, 0.0, Dimension(N)) == 0.0


def test_F_values(dim3):
    assert F_rhs(2.0, 0.37, dim3) == 0.0
    assert F_rhs(1.0, 1.0, dim3) == pytest.approx(2.0 / 3.0)


def test_F_singular_denominator(dim3):
    with pytest.raises(SingularDenominator) as info:
        F_rhs(2.5, 1.0, dim3)
    assert info.value.s == 1.0
    assert info.value.V == 2.5


def test_V_is_constant_for_m_two(dim3):
    v = solve_V_ivp(2.0, dim3)
    s = np.linspace(0.0, 1.0, 50)
    assert np.all(v.at(s) == 2.0)
    v.raise_for_status()


@pytest.mark.parametrize("N", [3, 4, 5])
@pytest.mark.parametrize("m", [0.5, 1.0, 3.0])
def test_V_curvature_at_origin(N, m):
    dim = Dimension(N)
    v = solve_V_ivp(m, dim)
    h = 1e-3
    assert float(v.at(0.0)) == m
    curvature = 2.0 * (float(v.at(h)) - m) / h ** 2
    assert curvature == pytest.approx(2.0 * (N - 2) * m * (2.0 - m), rel=1e-2)


def test_V_monotone_and_bounded_below_for_m_one(dim3):
    v = solve_V_ivp(1.0, dim3)
    assert v.monotone
    assert np.all(v.V_values >= 1.0 - 1e-9)
    assert np.all(np.diff(v.V_values) >= -1e-9)
    assert v.s_end == pytest.approx(1.0)


def test_phi_from_V_closed_form_for_m_two(dim3):
    partial = phi_from_V(solve_V_ivp(2.0, dim3))
    assert np.allclose(partial.phi_values, 2.0 / partial.xi_samples ** 2, rtol=1e-14)


def test_phi_from_V_for_m_one(dim3):
    partial = phi_from_V(solve_V_ivp(1.0, dim3))
    xi, phi = partial.xi_samples, partial.phi_values
    assert xi[0] > xi[-1]
    assert np.all(phi > 0.0)
    assert partial.tail_error < 1e-3
    # m < 2: xi^2 phi grows as xi decreases
    assert np.all(np.diff(xi ** 2 * phi) >= -1e-9)
    assert residual_phi(partial) <= 1e-6


def test_m_two_profile_is_unbounded_at_origin(dim3):
    p = build_profile(2.0, dim3)
    assert p.classification is Classification.UNBOUNDED
    assert p.ell < 1e-3
    assert p.extension_value == np.inf
    assert p.diagnostics["coarse_classification"] == "Unbounded"


@pytest.mark.parametrize("m", [0.5, 1.0, 3.0])
def test_profile_is_tolerance_stable_with_small_residual(dim3, m):
    p = build_profile(m, dim3)
    assert p.classification is not Classification.INDETERMINATE
    assert p.diagnostics["coarse_classification"] == p.classification.value
    if p.classification is Classification.TOUCHES_ZERO:
        assert p.ell > 0.0
    if p.classification is Classification.REGULAR:
        assert p.ell == 0.0

    skip = p.diagnostics["residual_skipped"]
    assert skip in (0, NEAR_ELL_SAMPLES)
    assert p.diagnostics["residual"] <= 1e-6
    assert residual_phi(p, skip=skip) == p.diagnostics["residual"]
    # the stored residual runs past the partial window down to ell
    assert p.xi_samples[-1] < p.diagnostics["xi_lo"]
    assert abs(p.xi_samples[0] ** 2 * p.phi_values[0] - m) <= 1e-3


def test_zero_event_gives_touches_zero(dim3):
    xi = np.geomspace(10.0, 0.5, 50)
    partial = SelfSimilarProfile(
        TailCoefficient(3.0), dim3, 0.0, Classification.INDETERMINATE, xi, np.linspace(0.03, 1e-10, 50),
        np.inf, dphi_values=np.full(50, 0.01), diagnostics={"event": "zero"},
    )
    p = continue_phi(partial)
    assert p.classification is Classification.TOUCHES_ZERO
    assert p.ell == pytest.approx(0.5)
    assert p.extension_value == 0.0


def test_residual_of_exact_profile():
    xi = np.geomspace(10.0, 1.0, 2000)
    assert residual_phi(analytic(xi, 2.0 / xi ** 2)) <= 1e-8
    assert residual_phi(analytic(xi, np.zeros_like(xi))) == 0.0


def test_residual_sees_a_perturbed_sample():
    xi = np.geomspace(10.0, 1.0, 1000)
    phi = 2.0 / xi ** 2
    base = residual_phi(analytic(xi, phi))
    delta = 1e-6
    bumped = phi.copy()
    bumped[500] += delta
    h = np.log(xi[0] / xi[1])
    increase = residual_phi(analytic(xi, bumped)) - base
    scale = delta / h ** 2 / xi[500] ** 2
    assert 0.01 * scale < increase < 100.0 * scale


def test_flux_identity_on_exact_profile():
    xi = np.geomspace(10.0, 1.0, 4000)
    assert weighted_flux_check(analytic(xi, 2.0 / xi ** 2)) <= 1e-6

    coarse = np.geomspace(10.0, 1.0, 500)
    fine = np.geomspace(10.0, 1.0, 999)
    e1 = weighted_flux_check(analytic(coarse, 2.0 / coarse ** 2))
    e2 = weighted_flux_check(analytic(fine, 2.0 / fine ** 2))
    assert e1 / e2 > 3.0


def test_flux_constant_when_phi_is_one_over_N():
    xi = np.geomspace(10.0, 1.0, 500)
    assert weighted_flux_check(analytic(xi, np.full_like(xi, 1.0 / 3.0))) == 0.0


def test_evaluate_profile_tail_and_extension(singular_profile):
    xi = np.array([0.0, 1e-4, 0.5, 2.0, 5e3])
    values = evaluate_profile(singular_profile, xi)
    assert values[0] == np.inf
    assert np.allclose(values[1:], 2.0 / xi[1:] ** 2, rtol=1e-10)


def test_residual_from_carried_slopes():
    xi = np.geomspace(10.0, 1.0, 2000)
    exact = SelfSimilarProfile(TailCoefficient(2.0), Dimension(3), 0.0, Classification.INDETERMINATE,
                               xi, 2.0 / xi ** 2, np.inf, dphi_values=-4.0 / xi ** 3)
    assert residual_phi(exact) <= 1e-8


def test_residual_skips_samples_next_to_ell():
    xi = np.geomspace(10.0, 1.0, 2000)
    phi = 2.0 / xi ** 2
    bad = phi.copy()
    bad[-10] += 1e-3
    assert residual_phi(analytic(xi, bad)) > 1e-3
    assert residual_phi(analytic(xi, bad), skip=60) <= 1e-8
    with pytest.raises(TooCoarse):
        residual_phi(analytic(xi, phi), skip=5000)
