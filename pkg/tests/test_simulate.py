import numpy as np
import pytest

from volterra_ergodic.covariance import CovarianceOracle, fbm_cov, power_markov_cov, stationary_cov
from volterra_ergodic.errors import GridMismatchError, NotPositiveDefiniteError
from volterra_ergodic.kernels import Fbm, PowerMarkov
from volterra_ergodic.simulate import (PathEnsemble, Seed, TimeGrid, coarsen_increments, lamperti,
                                       sample_bm_increments, sample_cholesky, sample_ou, sample_stationary,
                                       sample_stationary_circulant, synth_from_kernel, synthesis_weights)


def zscores(X, R):
    N = X.shape[0]
    emp = X.T @ X / N
    d = np.diag(R)
    se = np.sqrt((d[:, None] * d[None, :] + R**2) / N)
    return (emp - R) / se


# grids

def test_uniform_grid():
    g = TimeGrid.uniform_grid(2.0, 8)
    assert len(g) == 9 and g.uniform and g.step == 0.25 and g.starts_at_zero
    assert g.horizon == 2.0
    assert g.index_of(0.75) == 3
    with pytest.raises(GridMismatchError):
        g.index_of(0.8)
    with pytest.raises(ValueError):
        TimeGrid.uniform_grid(0.0, 4)


@pytest.mark.parametrize("points", [[0.0, 0.5, 0.5], [0.0, 1.0, 0.5], [-1.0, 0.0], [0.0, np.inf], []])
def test_grid_validation(points):
    with pytest.raises(ValueError):
        TimeGrid(np.array(points))


def test_grid_is_read_only():
    g = TimeGrid.uniform_grid(1.0, 4)
    with pytest.raises(ValueError):
        g.points[1] = 3.0


def test_extended_grid():
    g = TimeGrid.extended(1.0, 16, 32.0)
    assert g.horizon == 32.0
    assert g.index_of(1.0) == 16
    w = g.widths
    assert np.allclose(w[:16], 1 / 16)
    ratios = w[17:] / w[16:-1]
    assert np.all(ratios < 1 + 1.5 / 16)
    with pytest.raises(ValueError):
        TimeGrid.extended(1.0, 16, 1.0)


def test_restrict_and_subsample():
    g = TimeGrid.extended(1.0, 8, 4.0)
    sub, keep = g.restrict(1.0)
    assert sub.horizon == 1.0 and keep.sum() == 9
    half = TimeGrid.uniform_grid(1.0, 8).subsample(2)
    assert np.array_equal(half.points, np.linspace(0, 1, 5)) and half.step == 0.25


def test_lamperti_grid():
    g = TimeGrid.lamperti(-2.0, 0.1, 21, with_origin=True)
    assert g.points[0] == 0.0 and len(g) == 22
    assert np.allclose(np.diff(np.log(g.points[1:])), 0.1)


# ensembles and seeds

def test_path_ensemble_validation():
    g = TimeGrid.uniform_grid(1.0, 4)
    with pytest.raises(GridMismatchError):
        PathEnsemble(g, np.zeros((2, 4)))
    with pytest.raises(ValueError):
        PathEnsemble(g, np.ones((2, 5)))
    e = PathEnsemble(g, np.zeros(5))
    assert e.n_paths == 1
    e2 = e.with_values(np.zeros((1, 5)), tag="x")
    assert e2.meta["tag"] == "x" and "tag" not in e.meta


def test_seed_streams_independent_of_batching():
    s = Seed(11)
    whole = s.normals(6, 5)
    parts = np.vstack([s.normals(2, 5, first=0), s.normals(4, 5, first=2)])
    assert np.array_equal(whole, parts)
    assert not np.array_equal(s.normals(2, 5, purpose=1), whole[:2])
    assert not np.array_equal(Seed(12).normals(2, 5), whole[:2])
    with pytest.raises(ValueError):
        Seed(-1)


def test_bm_increment_variance():
    g = TimeGrid(np.array([0.0, 0.1, 0.5, 2.0]))
    inc = sample_bm_increments(g, 40_000, 3)
    assert inc.shape == (40_000, 3)
    var = inc.var(axis=0)
    assert np.all(np.abs(var / g.widths - 1) < 5 * np.sqrt(2 / 40_000))
    with pytest.raises(ValueError):
        sample_bm_increments(g, 0, 3)


def test_coarsen_increments():
    inc = np.arange(8.0).reshape(1, 8)
    assert np.array_equal(coarsen_increments(inc, 4), [[6.0, 22.0]])
    with pytest.raises(GridMismatchError):
        coarsen_increments(inc, 3)


# synthesis

def test_brownian_synthesis_is_cumulative_sum():
    g = TimeGrid.uniform_grid(1.0, 16)
    W = synthesis_weights(Fbm(0.5), g)
    assert np.array_equal(W, np.tril(np.ones((17, 16)), -1))


@pytest.mark.parametrize("alpha,beta", [(0.2, 0.7), (-0.3, 0.4), (1.0, 0.5)])
def test_rms_weights_are_exact_for_power_markov(alpha, beta):
    spec = PowerMarkov(alpha, beta)
    g = TimeGrid(np.concatenate([[0.0], np.sort(np.random.default_rng(1).uniform(0.01, 3, 12))]))
    W = synthesis_weights(spec, g)
    t = g.points
    R = power_markov_cov(spec, t[:, None], t[None, :])
    assert np.allclose((W * g.widths) @ W.T, R, rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("H,tol", [(0.3, 0.05), (0.7, 0.01)])
def test_fbm_synthesis_covariance_converges(H, tol):
    g = TimeGrid.uniform_grid(1.0, 512)
    W = synthesis_weights(Fbm(H), g)
    idx = np.array([64, 256, 512])
    C = ((W * g.widths) @ W.T)[np.ix_(idx, idx)]
    t = g.points[idx]
    R = fbm_cov(H, t[:, None], t[None, :])
    assert np.max(np.abs(C / R - 1)) < tol


def test_synthesis_validation():
    with pytest.raises(GridMismatchError):
        synthesis_weights(Fbm(0.6), TimeGrid(np.array([0.5, 1.0])))
    with pytest.raises(ValueError):
        synthesis_weights(Fbm(0.6), TimeGrid.uniform_grid(1.0, 4), moments="median")
    g = TimeGrid.uniform_grid(1.0, 4)
    with pytest.raises(GridMismatchError):
        synth_from_kernel(Fbm(0.6), g, np.zeros((2, 3)))


def test_synth_metadata_and_origin():
    g = TimeGrid.uniform_grid(1.0, 8)
    ens = synth_from_kernel(Fbm(0.6), g, sample_bm_increments(g, 3, 1))
    assert ens.meta["beta"] == 0.6 and ens.meta["method"] == "volterra"
    assert np.all(ens.values[:, 0] == 0.0)


# exact samplers

def test_cholesky_sampler_covariance_and_determinism():
    oracle = CovarianceOracle(Fbm(0.3))
    g = TimeGrid.uniform_grid(1.0, 6)
    a = sample_cholesky(oracle, g, 20_000, 5)
    b = sample_cholesky(oracle, g, 20_000, 5)
    assert np.array_equal(a.values, b.values)
    t = g.points[1:]
    z = zscores(a.values[:, 1:], fbm_cov(0.3, t[:, None], t[None, :]))
    assert np.max(np.abs(z)) < 5


def test_lamperti_transform_is_stationary():
    oracle = CovarianceOracle(Fbm(0.7))
    g = TimeGrid.lamperti(-3.0, 0.25, 13)
    X = sample_cholesky(oracle, g, 20_000, 2)
    Y = lamperti(X, 0.7)
    assert np.allclose(np.diff(Y.u), 0.25)
    var = np.mean(Y.values**2, axis=0)
    assert np.all(np.abs(var - 1) < 5 * np.sqrt(2 / 20_000))
    back = Y.to_time_domain(0.7)
    assert np.allclose(back.values, X.values, rtol=1e-12, atol=1e-14)
    with pytest.raises(GridMismatchError):
        lamperti(sample_cholesky(oracle, TimeGrid.uniform_grid(1.0, 4), 2, 1), 0.7)


@pytest.mark.parametrize("sampler", ["cholesky", "circulant"])
def test_stationary_samplers(sampler):
    oracle = CovarianceOracle(Fbm(0.7))
    m, du, N = 24, 0.1, 20_000
    if sampler == "cholesky":
        Y = sample_stationary(oracle, 0.0, du, m, N, 4)
    else:
        # a long window makes the circulant embedding non-negative
        Y = sample_stationary_circulant(oracle, 0.0, du, 400, N, 4)
        Y.values = Y.values[:, :m]
    rho = stationary_cov(oracle, du * np.arange(m))
    R = rho[np.abs(np.subtract.outer(np.arange(m), np.arange(m)))]
    assert np.max(np.abs(zscores(Y.values, R))) < 5.5


def test_circulant_rejects_nonembeddable():
    class Bad:
        spec = PowerMarkov(0.0, 0.5)
        beta = 0.5

        def __call__(self, s, t):
            # Lamperti autocovariance cos(3 d): not positive definite as a sequence on a long window
            d = np.log(np.asarray(t) / np.asarray(s))
            return np.sqrt(np.asarray(s) * np.asarray(t)) * np.cos(3 * d) * (1 + 0.5 * (d != 0))

    with pytest.raises(NotPositiveDefiniteError):
        sample_stationary_circulant(Bad(), 0.0, 0.1, 40, 2, 1)


def test_ou_sampler():
    Y = sample_ou(0.2, 0.0, 0.05, 40, 20_000, 9)
    var = 1 / 1.4
    assert np.mean(Y.values[:, -1] ** 2) == pytest.approx(var, rel=5 * np.sqrt(2 / 20_000))
    c = np.mean(Y.values[:, 10] * Y.values[:, 11]) / var
    assert c == pytest.approx(np.exp(-0.7 * 0.05), abs=5 / np.sqrt(20_000))
