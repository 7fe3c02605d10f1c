import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from volterra_ergodic.errors import EvaluationError
from volterra_ergodic.special import fbm_c, gauss_2f1


def test_zero_argument_is_one():
    assert gauss_2f1(0.3, -0.2, 1.1, 0.0) == 1.0


def test_vanishing_parameter_is_one():
    assert gauss_2f1(0.0, 0.3, 1.2, -5.0) == 1.0


def test_terminating_polynomial():
    assert gauss_2f1(-1.0, 2.0, 3.0, -2.0) == pytest.approx(7.0 / 3.0, rel=1e-13)


@pytest.mark.parametrize("m", [1, 2, 3, 5])
@pytest.mark.parametrize("x", [-0.3, -2.0, -40.0])
def test_terminating_cases_match_polynomial(m, x):
    b, c = 0.7, 1.3
    exact = sum(float(mp.rf(-m, k) * mp.rf(b, k) / (mp.rf(c, k) * mp.factorial(k))) * x**k
                for k in range(m + 1))
    assert gauss_2f1(-m, b, c, x) == pytest.approx(exact, rel=1e-13, abs=1e-13)


@settings(max_examples=60, deadline=None)
@given(
    H=st.floats(0.02, 0.98),
    x=st.floats(-1e6, 0.0),
)
def test_fbm_parameters_against_mpmath(H, x):
    a, b, c = 0.5 - H, H - 0.5, H + 0.5
    ref = float(mp.hyp2f1(a, b, c, x))
    assert gauss_2f1(a, b, c, x) == pytest.approx(ref, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    a=st.floats(-2.5, 2.5),
    b=st.floats(-2.5, 2.5),
    c=st.floats(0.1, 4.0),
    x=st.floats(-1e6, 0.0),
)
def test_generic_parameters_against_mpmath(a, b, c, x):
    with mp.workdps(40):
        ref = float(mp.hyp2f1(a, b, c, x))
    got = gauss_2f1(a, b, c, x)
    assert got == pytest.approx(ref, rel=1e-10, abs=1e-12 * max(1.0, abs(ref)))


@pytest.mark.parametrize("H", [0.5 + 1e-5, 0.5 - 3e-5, 0.5 + 1e-3])
@pytest.mark.parametrize("x", [-0.9, -1e2, -1e4, -1e6])
def test_fbm_parameters_near_brownian(H, x):
    a, b, c = 0.5 - H, H - 0.5, H + 0.5
    assert gauss_2f1(a, b, c, x) == pytest.approx(float(mp.hyp2f1(a, b, c, x)), rel=1e-12)


@pytest.mark.parametrize("shift", [0.0, 1e-7, -2e-4, 0.03])
@pytest.mark.parametrize("m", [0, 1, -2])
def test_integer_parameter_difference(m, shift):
    a, c, x = 0.37, 1.6, -3e4
    b = a + m + shift
    ref = float(mp.hyp2f1(a, b, c, x))
    assert gauss_2f1(a, b, c, x) == pytest.approx(ref, rel=1e-11)


def test_array_input_keeps_shape():
    x = -np.linspace(0, 10, 12).reshape(3, 4)
    out = gauss_2f1(0.2, -0.2, 1.2, x)
    assert out.shape == (3, 4)
    assert out[1, 2] == pytest.approx(float(mp.hyp2f1(0.2, -0.2, 1.2, x[1, 2])), rel=1e-12)


def test_domain_errors():
    with pytest.raises(ValueError):
        gauss_2f1(0.1, 0.2, 1.0, 0.5)
    with pytest.raises(ValueError):
        gauss_2f1(0.1, 0.2, -2.0, -0.5)


def test_term_cap_raises_with_parameters():
    with pytest.raises(EvaluationError) as info:
        gauss_2f1(0.5, 0.5, 1.0, -1.0, max_terms=5)
    assert info.value.x == -1.0
    assert (info.value.a, info.value.b, info.value.c) == (0.5, 0.5, 1.0)


@pytest.mark.parametrize("H", [0.1, 0.25, 0.5, 0.7, 0.95])
def test_fbm_c_against_mpmath(H):
    ref = mp.sqrt(2 * H * mp.gamma(1.5 - H) / (mp.gamma(H + 0.5) * mp.gamma(2 - 2 * H)))
    assert fbm_c(H) == pytest.approx(float(ref), rel=1e-14)


def test_fbm_c_brownian():
    assert fbm_c(0.5) == pytest.approx(1.0, rel=1e-15)
    with pytest.raises(ValueError):
        fbm_c(1.0)
    assert math.isfinite(fbm_c(0.999))


@pytest.mark.parametrize("a,b,c,x", [
    (2.2250738585e-313, 1.0, 1.0, -2.0),  # subnormal parameter
    (-2.465583309631696, -1.175494351e-38, 0.1, -524136.2916927602),  # tiny b far from an integer difference
    (-1.956193546151018, 1.5468168879065495e-34, 0.1, -446517.43319296895),  # tiny b, b - a near 2
    (1e-9, -1.0, 1.0794180706315137, -1e6),  # polynomial at large |x|
    (-3.0, 0.7, 1.3, -1e5),
])
def test_nearly_vanishing_coefficients(a, b, c, x):
    with mp.workdps(40):
        ref = float(mp.hyp2f1(a, b, c, x))
    assert gauss_2f1(a, b, c, x) == pytest.approx(ref, rel=1e-12)
