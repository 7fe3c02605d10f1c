import math

import numpy as np
import pytest
from scipy import integrate as sint
from scipy.special import beta as beta_fn

from volterra_ergodic.errors import QuadratureError
from volterra_ergodic.quadrature import _gauss_jacobi, integrate, reference_rule


@pytest.mark.parametrize("p,q", [(-0.5, 0.0), (0.3, -0.7), (-0.9, -0.9), (1.5, 0.2)])
def test_beta_integrals(p, q):
    got = integrate(lambda x: np.ones_like(x), 0.0, 1.0, left_power=p, right_power=q, tol=1e-13)
    assert got == pytest.approx(beta_fn(p + 1, q + 1), rel=1e-12)


def test_shifted_interval_scaling():
    # int_2^5 (x-2)^-0.4 (5-x)^0.3 cos(x) dx against scipy's weighted QUADPACK rule
    ref, _ = sint.quad(np.cos, 2.0, 5.0, weight="alg", wvar=(-0.4, 0.3), epsabs=1e-14, epsrel=1e-13)
    got = integrate(np.cos, 2.0, 5.0, left_power=-0.4, right_power=0.3, tol=1e-13)
    assert got == pytest.approx(ref, rel=1e-11)


def test_vectorised_limits():
    b = np.array([0.5, 1.0, 3.0])
    got = integrate(lambda x: x**2, 0.0, b, left_power=-0.5)
    # int_0^b x^(3/2) dx
    assert got == pytest.approx(b**2.5 / 2.5, rel=1e-12)


def test_empty_interval_is_zero():
    assert integrate(np.exp, 1.0, 1.0) == 0.0


def test_invalid_inputs():
    with pytest.raises(ValueError):
        integrate(np.exp, 0.0, 1.0, left_power=-1.0)
    with pytest.raises(ValueError):
        integrate(np.exp, 1.0, 0.0)


def test_nonconvergence_reports_cell():
    with pytest.raises(QuadratureError) as info:
        integrate(lambda x: np.sign(np.sin(200 * x)), 0.0, 1.0, tol=1e-14, n_max=16)
    lo, hi = info.value.interval
    assert 0.0 <= lo < hi <= 1.0


@pytest.mark.parametrize("n,a,b", [(8, -0.5, 0.3), (32, 0.7, -0.8), (64, -0.95, 0.0)])
def test_gauss_jacobi_moments(n, a, b):
    x, w = _gauss_jacobi(n, a, b)
    for k in range(0, 2 * n - 1, 7):
        ref, _ = sint.quad(lambda y: y**k, -1, 1, weight="alg", wvar=(b, a), epsabs=1e-15, epsrel=1e-14)
        assert np.sum(w * x**k) == pytest.approx(ref, rel=1e-11, abs=1e-13)


def test_reference_rule_weights_sum_to_beta():
    x, w, cells, edges = reference_rule(16, -0.3, 0.4)
    assert np.all((x > 0) & (x <= 1))
    assert w.sum() == pytest.approx(math.gamma(0.7) * math.gamma(1.4) / math.gamma(2.1), rel=1e-12)
    assert edges[0, 0] == 0.0 and edges[-1, 1] == 1.0
    assert np.all(np.diff(cells) >= 0)
