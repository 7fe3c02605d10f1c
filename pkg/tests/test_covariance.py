import mpmath as mp
import numpy as np
import pytest
from scipy import integrate as sint

from volterra_ergodic.covariance import (CovarianceOracle, cov_matrix, fbm_cov, kernel_cov, kernel_cov_quad,
                                         nalpha_cov, power_markov_cov, selfsim_bound_check, stationary_cov,
                                         transform_cov_oracle)
from volterra_ergodic.errors import NotPositiveDefiniteError
from volterra_ergodic.kernels import CustomFactor, Fbm, PowerMarkov, kernel_eval


@pytest.mark.parametrize("H", [0.1, 0.5, 0.9])
@pytest.mark.parametrize("s,t", [(1.0, 1.0), (0.3, 2.0), (1e-8, 1.0), (2.0, 0.5)])
def test_fbm_cov_against_mpmath(H, s, t):
    with mp.workdps(40):
        ref = (mp.mpf(s) ** (2 * H) + mp.mpf(t) ** (2 * H) - abs(mp.mpf(s) - mp.mpf(t)) ** (2 * H)) / 2
    assert fbm_cov(H, s, t) == pytest.approx(float(ref), rel=1e-13)


def test_fbm_cov_zero_and_domain():
    assert fbm_cov(0.3, 0.0, 1.0) == 0.0
    assert fbm_cov(0.3, 0.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        fbm_cov(0.3, -1.0, 1.0)
    with pytest.raises(ValueError):
        fbm_cov(1.3, 1.0, 1.0)


@pytest.mark.parametrize("H", [0.2, 0.45, 0.8])
def test_kernel_quadrature_reproduces_fbm(H):
    s = np.array([0.1, 0.5, 1.0, 1.0, 2.0])
    t = np.array([0.1, 1.0, 1.0, 3.0, 2.5])
    assert kernel_cov_quad(Fbm(H), s, t) == pytest.approx(fbm_cov(H, s, t), rel=1e-8)


def test_power_markov_against_scipy():
    spec = PowerMarkov(0.3, 0.6, c=1.5)
    s, t = 0.7, 1.3
    ref, _ = sint.quad(lambda u: kernel_eval(spec, s, u) * kernel_eval(spec, t, u), 0, s,
                       epsabs=0, epsrel=1e-13)
    assert power_markov_cov(spec, s, t) == pytest.approx(ref, rel=1e-11)
    assert kernel_cov(CovarianceOracle(spec), s, t) == pytest.approx(ref, rel=1e-9)


def test_nalpha_cov():
    assert nalpha_cov(0.5, 0.4, 3.0) == pytest.approx(0.4**2 / 2)
    assert nalpha_cov(-0.25, 2.0, 1.0) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        nalpha_cov(-0.5, 1.0, 1.0)


def test_custom_factor_covariance_by_quadrature():
    H = 0.3
    fbm = Fbm(H)
    custom = CustomFactor(H, fbm.factor, factor_exponent=fbm.origin_exponent, name="fbm-copy")
    oracle = CovarianceOracle(custom)
    assert not oracle.analytic
    assert oracle(0.5, 2.0) == pytest.approx(fbm_cov(H, 0.5, 2.0), rel=1e-8)


def test_oracle_modes_agree():
    a = CovarianceOracle(Fbm(0.35))
    q = CovarianceOracle(Fbm(0.35), mode="quadrature")
    assert a.analytic and not q.analytic
    assert q(0.4, 1.1) == pytest.approx(a(0.4, 1.1), rel=1e-8)
    with pytest.raises(ValueError):
        CovarianceOracle(Fbm(0.35), mode="exact")


def test_cov_matrix_structure():
    oracle = CovarianceOracle(Fbm(0.7))
    C = cov_matrix(oracle, np.linspace(0, 1, 9))
    assert np.all(C.entries[0] == 0) and np.all(C.entries[:, 0] == 0)
    assert np.allclose(C.entries, C.entries.T)
    assert C.positive_definite
    L = C.cholesky()
    assert np.allclose(L @ L.T, C.entries[1:, 1:], atol=1e-14)
    Cj = cov_matrix(oracle, np.linspace(0, 1, 9), jitter=True)
    assert Cj.jitter == pytest.approx(1e-12)
    with pytest.raises(ValueError):
        cov_matrix(oracle, [0.0, 0.5, 0.5])


class _RankOne:
    """Covariance of ``xi t^beta``: singular on any grid of more than one point."""

    spec = PowerMarkov(0.0, 0.5)
    beta = 0.5

    def __call__(self, s, t):
        return np.sqrt(np.asarray(s) * np.asarray(t))


def test_singular_matrix_raises():
    C = cov_matrix(_RankOne(), [0.5, 1.0, 2.0])
    with pytest.raises(NotPositiveDefiniteError) as info:
        C.cholesky()
    assert info.value.min_eigenvalue is not None


@pytest.mark.parametrize("H", [0.2, 0.8])
def test_selfsimilar_bound(H):
    oracle = CovarianceOracle(Fbm(H))
    rng = np.random.default_rng(0)
    pts = rng.uniform(0.01, 5.0, size=(200, 2))
    assert selfsim_bound_check(oracle, pts) <= 1e-15


def test_stationary_cov():
    oracle = CovarianceOracle(Fbm(0.3))
    assert stationary_cov(oracle, 0.0) == pytest.approx(1.0)
    assert stationary_cov(oracle, 0.7) == pytest.approx(stationary_cov(oracle, -0.7))
    # Lamperti transform of Brownian motion: exp(-|d|/2)
    bm = CovarianceOracle(Fbm(0.5))
    assert stationary_cov(bm, 1.3) == pytest.approx(np.exp(-0.65), rel=1e-14)


def _expansion_by_scipy(spec, alpha, s, t):
    R = lambda a, b: power_markov_cov(spec, a, b)
    b = spec.beta
    g, p, k = b - alpha - 0.5, alpha - b - 0.5, 2 * alpha + 1

    def I(a, upper):
        pts = [a] if a < upper else None
        return sint.quad(lambda u: u**p * R(a, u), 0, upper, points=pts, epsabs=0, epsrel=1e-12, limit=200)[0]

    J = sint.quad(lambda v: v**p * I(v, t), 0, s, epsabs=0, epsrel=1e-10, limit=200)[0]
    return R(s, t) - k * t**g * I(s, t) - k * s**g * I(t, s) + k * k * (s * t) ** g * J


def test_transform_cov_against_independent_expansion():
    spec = PowerMarkov(0.3, 0.9)
    oracle = CovarianceOracle(spec)
    s, t, alpha = 0.7, 1.3, 0.1
    got = transform_cov_oracle(oracle, alpha, s, t)
    assert got == pytest.approx(_expansion_by_scipy(spec, alpha, s, t), rel=1e-7)
    assert got == pytest.approx(oracle(s, t), rel=1e-7)


def test_transform_cov_degenerate_and_symmetric():
    oracle = CovarianceOracle(Fbm(0.6))
    assert transform_cov_oracle(oracle, 0.2, 0.0, 1.0) == 0.0
    a = transform_cov_oracle(oracle, 0.2, 0.5, 1.5)
    b = transform_cov_oracle(oracle, 0.2, 1.5, 0.5)
    assert a == b
    assert a == pytest.approx(fbm_cov(0.6, 0.5, 1.5), rel=1e-5)
