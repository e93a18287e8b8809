# tests/test_relaxation.py
import numpy as np
import pytest

from kslab.errors import DegenerateTail, InvalidConfig
from kslab.services.relaxation import epsilon_ordering_check, h_relaxation_oracle


def test_steady_state_close_to_ivp_near_the_origin(dim3):
    result = h_relaxation_oracle(1.0, dim3, eps=0.05, Lm=0.15)
    assert result.ivp_relative_difference <= 1e-3
    assert result.initial_first_order_residual <= 1e-5
    # m < 2: h rises in time and in s
    assert result.min_signed_ht >= -1e-8
    assert result.min_signed_hs >= -1e-8


def test_steady_state_on_the_wider_interval(dim3):
    result = h_relaxation_oracle(1.0, dim3, eps=0.05, Lm=0.3)
    assert result.ivp_relative_difference <= 1e-2
    assert result.field.values[0] == pytest.approx(result.ivp_field.values[0])
    assert result.field.values[-1] == pytest.approx(result.ivp_field.values[-1])


def test_m_three_is_nonincreasing_in_t_and_s(dim3):
    result = h_relaxation_oracle(3.0, dim3, eps=0.05, Lm=0.3)
    assert result.min_signed_ht >= -1e-8
    assert result.min_signed_hs >= -1e-8
    assert np.all(result.field.values <= result.ivp_field.values + 1e-9)


def test_degenerate_and_invalid_inputs(dim3):
    with pytest.raises(DegenerateTail):
        h_relaxation_oracle(2.0, dim3, eps=0.05, Lm=0.3)
    with pytest.raises(InvalidConfig):
        h_relaxation_oracle(1.0, dim3, eps=0.3, Lm=0.3)


def test_smaller_eps_gives_larger_h_for_m_below_two(dim3):
    check = epsilon_ordering_check(1.0, dim3, [0.05, 0.1], Lm=0.15, tol=1e-6)
    assert check["passed"]
    assert len(check["pairs"]) == 1
