"""Statistical and deterministic verification of the transformation.

Every test returns a :class:`VerificationReport` whose pass flag is a pure
function of its statistics and thresholds.  Sample covariances of Gaussian
vectors are compared with their oracle through

    z = (empirical - R) / SE,   SE^2 = (R_ss R_tt + R_st^2) / N.
"""
import json
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .covariance import CovarianceOracle, fbm_cov, nalpha_cov, transform_cov_oracle
from .errors import GridMismatchError
from .kernels import (Fbm, PowerMarkov, check_alpha, kernel_eval, kernel_identity_residual)
from .martingales import BridgeSpec, bridge, nalpha_path, yh_path, yh_representation
from .simulate import (PathEnsemble, TimeGrid, _as_seed, coarsen_increments, sample_bm_increments,
                       sample_cholesky, sample_stationary_circulant, synth_from_kernel,
                       synthesis_weights)
from .transform import (TransformParams, composition_error, lamperti_iterates, molchan,
                        transfer_function, z_alpha_forward)

Z_THRESHOLD = 5.0
KS_LEVEL = 0.01
KS_TIMES = 5
SE_MULTIPLE = 4.0
SPAN_EPS = 0.02
RIDGE = 1e-8
MIN_PATHS = 30
# Lamperti-domain step: the discrete all-pass filter loses ~0.3 (a du)^2 of
# variance per iteration
FILTER_ADU = 0.025
BATCH = 5000

_OPS = {
    "<=": lambda x, y: x <= y,
    "<": lambda x, y: x < y,
    ">=": lambda x, y: x >= y,
    ">": lambda x, y: x > y,
}


@dataclass
class VerificationReport:
    """Outcome of one test.

    ``checks`` lists ``(statistic, op, threshold)`` key triples; the test
    passes when every comparison holds.
    """

    test: str
    params: dict
    statistics: dict
    threshold: dict
    checks: tuple
    seed: int = None
    wall_time_s: float = None

    @property
    def passed(self):
        return all(bool(_OPS[op](self.statistics[s], self.threshold[t])) for s, op, t in self.checks)

    def to_dict(self, timing=True):
        return {
            "test": self.test,
            "params": _jsonable(self.params),
            "statistics": _jsonable(self.statistics),
            "threshold": _jsonable(self.threshold),
            "pass": self.passed,
            "seed": self.seed,
            "wall_time_s": self.wall_time_s if timing else None,
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    return obj


def reports_to_json(reports, timing=True, config=None):
    """Serialise a list of reports with a summary; stable key order."""
    doc = {
        "config": _jsonable(config) if config is not None else None,
        "pass": all(r.passed for r in reports),
        "n_tests": len(reports),
        "n_failed": sum(not r.passed for r in reports),
        "reports": [r.to_dict(timing) for r in reports],
    }
    return json.dumps(doc, indent=2, sort_keys=False)


def _timed(fn):
    """Fill ``wall_time_s`` of the returned report(s)."""
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        out = fn(*args, **kwargs)
        dt = time.perf_counter() - t0
        rep = out[-1] if isinstance(out, tuple) else out
        rep.wall_time_s = dt
        return out
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    wrapper.__wrapped__ = fn
    return wrapper


@dataclass
class GramMatrix:
    """Inner products of scalar random variables, with labels and the
    Monte Carlo standard errors of the entries (if estimated)."""

    labels: list
    entries: np.ndarray
    se: np.ndarray = field(default=None)

    def __post_init__(self):
        G = np.asarray(self.entries, dtype=float)
        if G.ndim != 2 or G.shape[0] != G.shape[1] or G.shape[0] != len(self.labels):
            raise ValueError("Gram matrix must be square and match its labels")
        if not np.allclose(G, G.T, rtol=1e-12, atol=0.0):
            raise ValueError("Gram matrix must be symmetric")
        if np.any(np.diag(G) < 0):
            raise ValueError("Gram matrix diagonal must be non-negative")
        self.entries = 0.5 * (G + G.T)

    def correlation(self):
        d = np.sqrt(np.diag(self.entries))
        return self.entries / np.outer(d, d)

    def off_diagonal(self):
        return self.entries[~np.eye(len(self.labels), dtype=bool)]


def gaussian_cov_se(Rss, Rtt, Rst, N):
    """Standard error of a sample covariance ``mean(x_s x_t)`` of centred Gaussians."""
    return np.sqrt((Rss * Rtt + Rst**2) / N)


def bonferroni_z(n_tests, level=KS_LEVEL):
    """Two-sided normal quantile at ``level / n_tests``."""
    return float(stats.norm.isf(level / (2 * max(int(n_tests), 1))))


def _cov_z(X, R):
    """Max |z| of the sample second moments of rows ``X`` against ``R``."""
    N = X.shape[0]
    emp = X.T @ X / N
    d = np.diag(R)
    se = gaussian_cov_se(d[:, None], d[None, :], R, N)
    iu = np.triu_indices(R.shape[0])
    z = (emp - R)[iu] / se[iu]
    return z, emp


# --------------------------------------------------------------------------
# covariance and law

def _positive_points(ensemble):
    pos = ensemble.grid.points > 0
    return ensemble.grid.points[pos], ensemble.values[:, pos]


@_timed
def covariance_match(ensemble, oracle, threshold=None, seed=None, test="covariance_match"):
    """Max |z| over all entries of the sample covariance on positive grid
    times.  Threshold: ``max(5, Bonferroni z at 1%)``.  Fewer than 30 paths
    are flagged as insufficient (the test is then uninformative)."""
    t, X = _positive_points(ensemble)
    R = np.asarray(oracle(t[:, None], t[None, :]), dtype=float)
    z, _ = _cov_z(X, R)
    n_entries = z.size
    thr = max(Z_THRESHOLD, bonferroni_z(n_entries)) if threshold is None else float(threshold)
    statistics = {
        "max_abs_z": float(np.max(np.abs(z))),
        "n_entries": n_entries,
        "n_paths": ensemble.n_paths,
        "insufficient_n": ensemble.n_paths < MIN_PATHS,
    }
    return VerificationReport(
        test, {"spec": oracle.spec.label, "n_points": int(t.size)}, statistics,
        {"max_abs_z": thr}, (("max_abs_z", "<", "max_abs_z"),), seed,
    )


def _ks_marginals(t, X, oracle, n_times=KS_TIMES):
    idx = np.unique(np.linspace(0, t.size - 1, n_times).round().astype(int))
    sd = np.sqrt(np.asarray(oracle(t[idx], t[idx]), dtype=float))
    pvals = [float(stats.kstest(X[:, i] / s, "norm").pvalue) for i, s in zip(idx, sd)]
    return t[idx], pvals


@_timed
def measure_preservation_test(spec, alpha, grid, N, seed, skip_transform=False, oracle=None):
    """Sample ``X`` exactly (Cholesky), apply ``Z^alpha`` and compare the
    result at the positive points of ``grid`` with the covariance of ``X``;
    add KS tests of the standardised marginals at 5 grid times (Bonferroni
    at level 0.01).  Paths are simulated on :func:`augmented_grid`.

    ``oracle`` defaults to that of ``spec``; passing another one (e.g. a
    wrong Hurst index) gives the power check.
    """
    alpha = check_alpha(alpha)
    seed = _as_seed(seed)
    true_oracle = CovarianceOracle(spec)
    ref = true_oracle if oracle is None else oracle
    pts = grid.points[grid.points > 0]
    fine, idx = augmented_grid(pts, alpha)
    X = sample_cholesky(true_oracle, fine, N, seed)
    if not skip_transform:
        X = z_alpha_forward(X, TransformParams(alpha, spec.beta, T=grid.horizon))
    Z = PathEnsemble(TimeGrid(pts), X.values[:, idx], X.meta)
    cov = covariance_match.__wrapped__(Z, ref)
    t, vals = _positive_points(Z)
    times, pvals = _ks_marginals(t, vals, ref)
    statistics = dict(cov.statistics, ks_pvalues=pvals, ks_min_pvalue=min(pvals), ks_times=times)
    threshold = dict(cov.threshold, ks_min_pvalue=KS_LEVEL / len(pvals))
    params = {"spec": spec.label, "alpha": alpha, "n": len(grid) - 1, "N": int(N),
              "skip_transform": bool(skip_transform), "oracle": ref.spec.label}
    checks = cov.checks + (("ks_min_pvalue", ">", "ks_min_pvalue"),)
    return VerificationReport("measure_preservation", params, statistics, threshold, checks, seed.root)


@_timed
def selfsimilarity_test(ensemble, beta, a, seed=None):
    """Compare the covariance of ``X(a t)`` with ``a^(2 beta)`` times that of
    ``X(t)`` over grid times ``t`` with ``a t`` also on the grid.

    For ``a != 1`` the two covariances are estimated on disjoint halves of
    the paths, and SEs come from the Gaussian formula with the empirical
    covariances.
    """
    a = float(a)
    if not a > 0:
        raise ValueError("scale factor a must be positive")
    pts = ensemble.grid.points
    src, dst = [], []
    for i, t in enumerate(pts):
        if t <= 0:
            continue
        j = int(np.argmin(np.abs(pts - a * t)))
        if abs(pts[j] - a * t) <= 1e-9 * max(a * t, 1.0):
            src.append(i)
            dst.append(j)
    if len(src) < 1:
        raise GridMismatchError("no grid times t with a*t on the grid")
    V = ensemble.values
    if a == 1.0:
        first = second = V
    else:
        half = V.shape[0] // 2
        first, second = V[:half], V[half:]
    X1 = first[:, dst]
    X2 = a**beta * second[:, src]
    C1 = X1.T @ X1 / X1.shape[0]
    C2 = X2.T @ X2 / X2.shape[0]
    d1, d2 = np.diag(C1), np.diag(C2)
    se1 = gaussian_cov_se(d1[:, None], d1[None, :], C1, X1.shape[0])
    se2 = gaussian_cov_se(d2[:, None], d2[None, :], C2, X2.shape[0])
    iu = np.triu_indices(len(src))
    se = np.sqrt(se1**2 + se2**2)[iu]
    z = np.where(se > 0, (C1 - C2)[iu] / np.where(se > 0, se, 1.0), 0.0)
    thr = max(Z_THRESHOLD, bonferroni_z(z.size))
    statistics = {"max_abs_z": float(np.max(np.abs(z))), "n_pairs": len(src), "n_paths": ensemble.n_paths}
    return VerificationReport("selfsimilarity", {"beta": float(beta), "a": a}, statistics,
                              {"max_abs_z": thr}, (("max_abs_z", "<", "max_abs_z"),), seed)


# --------------------------------------------------------------------------
# iterates on a logarithmic grid

def iterate_window(alpha, K):
    """Log-time window ``L`` holding the bulk of the ``K``-th iterate's
    impulse response (delay ~``2K / a``, spread ~``sqrt K / a``)."""
    a = check_alpha(alpha) + 0.5
    return (2 * K + 8 * np.sqrt(K) + 20) / a


def log_grid(T, alpha, K, adu=FILTER_ADU):
    """``{0} U T exp(-L + j du)``: uniform in log-time, ending at ``T``."""
    a = check_alpha(alpha) + 0.5
    du = adu / a
    L = iterate_window(alpha, K)
    m = int(np.ceil(L / du)) + 1
    return TimeGrid.lamperti(np.log(T) - (m - 1) * du, du, m, with_origin=True)


def augmented_grid(points, alpha, K=0, adu=FILTER_ADU):
    """``{0}``, the positive evaluation ``points`` and a log-time grid below
    them (see :func:`log_grid`) merged into one grid.

    On a uniform grid from 0 the transform's relative error at the ``j``-th
    point does not shrink with refinement; the log-time points resolve the
    path near the origin.  Returns ``(grid, index of each evaluation point)``.
    """
    pts = np.asarray(points, dtype=float)
    if np.any(pts <= 0):
        raise ValueError("evaluation points must be positive")
    base = log_grid(pts.max(), alpha, K, adu)
    du = base.log_step
    extra = base.points[1:]
    j = np.searchsorted(pts, extra).clip(0, pts.size - 1)
    gap = np.minimum(np.abs(extra - pts[j]), np.abs(extra - pts[(j - 1).clip(0)]))
    extra = extra[gap > 0.3 * du * extra]
    allp = np.unique(np.concatenate([[0.0], extra, pts]))
    return TimeGrid(allp), np.searchsorted(allp, pts)


def _iterates_at_T(ensemble, alpha, beta, K):
    """Columns ``Z^(alpha, n)_T``, ``n = 0..K``, of an ensemble ending at ``T``."""
    p = TransformParams(alpha, beta, T=ensemble.grid.horizon)
    out = np.empty((ensemble.n_paths, K + 1))
    cur = ensemble
    out[:, 0] = cur.values[:, -1]
    for n in range(1, K + 1):
        cur = z_alpha_forward(cur, p)
        out[:, n] = cur.values[:, -1]
    return out


def _nalpha_iterates(alpha, T, K, N, seed, purpose=0):
    grid = log_grid(T, alpha, K)
    cols = []
    for first in range(0, int(N), BATCH):
        n = min(BATCH, int(N) - first)
        inc = sample_bm_increments(grid, n, seed, first=first, purpose=purpose)
        Nn = nalpha_path(alpha, grid, inc, rule="exact")
        cols.append(_iterates_at_T(Nn, alpha, alpha + 0.5, K))
    return np.concatenate(cols, axis=0)


def _gram(V):
    N = V.shape[0]
    G = V.T @ V / N
    d = np.diag(G)
    se = gaussian_cov_se(d[:, None], d[None, :], G, N)
    return G, se


@_timed
def iterate_orthogonality(alpha, T, K, N, seed):
    """Monte Carlo Gram matrix of ``Z^(alpha, n)_T(N^alpha)``, ``n = 0..K``.

    Off-diagonals must be within 4 SE of 0 and diagonals within 4 SE of
    ``T^(2 alpha + 1) / (2 alpha + 1)`` (SE under the orthogonal null).
    """
    alpha = check_alpha(alpha)
    K = int(K)
    if not 0 <= K <= 6:
        raise ValueError("K must lie in 0..6")
    seed = _as_seed(seed)
    target = float(nalpha_cov(alpha, T, T))
    V = _nalpha_iterates(alpha, T, K, N, seed)
    G, _ = _gram(V)
    gram = GramMatrix(list(range(K + 1)), G)
    se_off = target / np.sqrt(N)
    se_diag = target * np.sqrt(2.0 / N)
    off = gram.off_diagonal()
    statistics = {
        "max_off_diag_z": float(np.max(np.abs(off)) / se_off) if off.size else 0.0,
        "max_diag_z": float(np.max(np.abs(np.diag(G) - target)) / se_diag),
        "min_diag": float(np.min(np.diag(G))),
        "gram": G,
        "target_variance": target,
    }
    threshold = {"se_multiple": SE_MULTIPLE, "min_diag": 0.0}
    checks = (("max_off_diag_z", "<=", "se_multiple"), ("max_diag_z", "<=", "se_multiple"),
              ("min_diag", ">", "min_diag"))
    report = VerificationReport("iterate_orthogonality", {"alpha": alpha, "T": T, "K": K, "N": int(N)},
                                statistics, threshold, checks, seed.root)
    return gram, report


@_timed
def completeness_check(spec, alpha, T, K, N, seed, min_eigenvalue=1e-3):
    """Freeness of ``{Z^(alpha, n)_T(X)}``, ``n = 0..K``: the smallest
    eigenvalue of their correlation matrix exceeds ``min_eigenvalue``; and
    each ``Z^(alpha, n)_T(X)`` correlates with ``Z^(alpha, n)_T(N^alpha)``
    (same noise) with |z| > 5."""
    alpha = check_alpha(alpha)
    K = int(K)
    seed = _as_seed(seed)
    grid = log_grid(T, alpha, max(K, 1))
    VX, VN = [], []
    for first in range(0, int(N), BATCH):
        n = min(BATCH, int(N) - first)
        inc = sample_bm_increments(grid, n, seed, first=first)
        X = synth_from_kernel(spec, grid, inc)
        Nn = nalpha_path(alpha, grid, inc, rule="exact")
        VX.append(_iterates_at_T(X, alpha, spec.beta, K))
        VN.append(_iterates_at_T(Nn, alpha, alpha + 0.5, K))
    VX = np.concatenate(VX)
    VN = np.concatenate(VN)
    G, _ = _gram(VX)
    gram = GramMatrix(list(range(K + 1)), G)
    lam = float(np.linalg.eigvalsh(gram.correlation())[0])
    cross = np.mean(VX * VN, axis=0)
    se = np.sqrt((np.mean(VX**2, axis=0) * np.mean(VN**2, axis=0) + cross**2) / VX.shape[0])
    zc = np.abs(cross) / se
    statistics = {"min_eigenvalue": lam, "min_cross_z": float(np.min(zc)), "cross_z": zc, "gram": G}
    threshold = {"min_eigenvalue": float(min_eigenvalue), "min_cross_z": Z_THRESHOLD}
    checks = (("min_eigenvalue", ">", "min_eigenvalue"), ("min_cross_z", ">", "min_cross_z"))
    return VerificationReport("completeness", {"spec": spec.label, "alpha": alpha, "T": T, "K": K,
                                               "N": int(N)}, statistics, threshold, checks, seed.root)


# --------------------------------------------------------------------------
# span equality

class _Regression:
    """Accumulated second moments for regressing targets ``Y`` on ``X``."""

    def __init__(self):
        self.xx = self.xy = self.yy = None
        self.n = 0

    def add(self, X, Y):
        xx, xy, yy = X.T @ X, X.T @ Y, np.sum(Y * Y, axis=0)
        if self.xx is None:
            self.xx, self.xy, self.yy = xx, xy, yy
        else:
            self.xx += xx
            self.xy += xy
            self.yy += yy
        self.n += X.shape[0]

    def residual_fraction(self):
        """``sum Var(Y_i | X) / sum Var(Y_i)`` (in-sample, ridge on ``X``)."""
        G = self.xx / self.n
        C = self.xy / self.n
        ridge = RIDGE * np.trace(G)
        B = np.linalg.solve(G + ridge * np.eye(G.shape[0]), C)
        total = float(np.sum(self.yy) / self.n)
        explained = float(np.sum(C * B))
        return (total - explained) / total


@_timed
def span_equality_residual(spec, alpha, T, n, N, seed, control=False, eps=SPAN_EPS):
    """Two-sided regression residual between ``Z^alpha(X)`` and the bridge
    ``N^(alpha, T)``.

    Targets are the values at the ``n`` points ``T j / n``; regressors are
    the other process at every point of the simulation grid
    (:func:`augmented_grid`), the finite surrogate of its closed span.  Both
    come from one Brownian ensemble; ``control=True`` draws the bridge from
    independent noise, in which case the residual fraction should be close
    to 1.
    """
    alpha = check_alpha(alpha)
    seed = _as_seed(seed)
    pts = T * np.arange(1, int(n) + 1) / int(n)
    grid, idx = augmented_grid(pts, alpha)
    p = TransformParams(alpha, spec.beta, T=T)
    weights = synthesis_weights(spec, grid)
    inner = slice(1, len(grid) - 1)  # the bridge vanishes at 0 and T
    z_on_b, b_on_z = _Regression(), _Regression()
    for first in range(0, int(N), BATCH):
        m = min(BATCH, int(N) - first)
        inc = sample_bm_increments(grid, m, seed, first=first)
        Z = z_alpha_forward(PathEnsemble(grid, inc @ weights.T), p).values
        inc_b = sample_bm_increments(grid, m, seed, first=first, purpose=1) if control else inc
        Bn = bridge(nalpha_path(alpha, grid, inc_b, rule="exact"), BridgeSpec(alpha, T)).values
        z_on_b.add(Bn[:, inner], Z[:, idx])
        b_on_z.add(Z[:, 1:], Bn[:, idx[:-1]])
    r1 = z_on_b.residual_fraction()
    r2 = b_on_z.residual_fraction()
    statistics = {"residual_z_on_bridge": r1, "residual_bridge_on_z": r2,
                  "max_residual": max(r1, r2), "min_residual": min(r1, r2),
                  "n_regressors": len(grid) - 2}
    if control:
        threshold = {"min_residual": 0.9}
        checks = (("min_residual", ">=", "min_residual"),)
    else:
        threshold = {"max_residual": float(eps)}
        checks = (("max_residual", "<=", "max_residual"),)
    params = {"spec": spec.label, "alpha": alpha, "T": T, "n": int(n), "N": int(N),
              "control": bool(control)}
    return VerificationReport("span_equality", params, statistics, threshold, checks, seed.root)


# --------------------------------------------------------------------------
# ergodicity

FUNCTIONALS = ("sign_at_T", "square_at_T")
MIXING_LAGS = 10


@_timed
def ergodic_average_test(spec, alpha, T, n_iter, n_seeds, functional="sign_at_T", seed=None,
                         tol=None, mixing_check=None):
    """Birkhoff averages ``A_N = (1/N) sum_(n<N) f(Z^(alpha, n)(X))`` per path.

    Each path is sampled exactly in the Lamperti domain on a log-time
    window long enough for ``n_iter`` iterates and transformed there.
    ``sign_at_T`` is the indicator ``X_T > 0`` (mean 1/2, tolerance 0.05
    on the seed-average of ``|A_N - 1/2|``); ``square_at_T`` has mean
    ``R(T, T)`` (relative tolerance 0.1).

    The mixing proxy ``Corr(X_T, Z^(alpha, n)_T(X))`` is reported for every
    ``n``; for ``X = N^alpha`` (power-Markov kernel with ``beta = alpha +
    1/2``) the lags ``1..10`` are required to be within 4 SE of 0.
    """
    if functional not in FUNCTIONALS:
        raise ValueError(f"functional must be one of {FUNCTIONALS}")
    alpha = check_alpha(alpha)
    seed = _as_seed(seed)
    oracle = CovarianceOracle(spec)
    beta = spec.beta
    a = alpha + 0.5
    du = FILTER_ADU / a
    L = iterate_window(alpha, n_iter)
    m = int(np.ceil(L / du)) + 1
    u0 = np.log(T) - (m - 1) * du
    Y = sample_stationary_circulant(oracle, u0, du, m, n_seeds, seed)
    vals = T**beta * lamperti_iterates(Y, alpha, beta, n_iter - 1)  # n = 0..n_iter-1
    if functional == "sign_at_T":
        f = (vals > 0).astype(float)
        target = 0.5
        dev = float(np.mean(np.abs(f.mean(axis=1) - target)))
        tol = 0.05 if tol is None else tol
    else:
        f = vals**2
        target = float(oracle(T, T))
        dev = float(abs(np.mean(f.mean(axis=1)) - target) / target)
        tol = 0.1 if tol is None else tol
    x0 = vals[:, :1]
    corr = np.array([np.corrcoef(x0[:, 0], vals[:, n])[0, 1] for n in range(1, vals.shape[1])])
    markov = isinstance(spec, PowerMarkov) and abs(spec.beta - (alpha + 0.5)) < 1e-12 and spec.alpha == alpha
    if mixing_check is None:
        mixing_check = markov
    lags = min(MIXING_LAGS, corr.size)
    mix_z = float(np.max(np.abs(corr[:lags])) * np.sqrt(n_seeds)) if lags else 0.0
    statistics = {"mean_abs_deviation": dev, "target": target, "mixing_corr": corr,
                  "mixing_max_z": mix_z, "window": float(L), "du": du}
    threshold = {"mean_abs_deviation": float(tol), "mixing_max_z": SE_MULTIPLE}
    checks = (("mean_abs_deviation", "<=", "mean_abs_deviation"),)
    if mixing_check:
        checks += (("mixing_max_z", "<=", "mixing_max_z"),)
    params = {"spec": spec.label, "alpha": alpha, "T": T, "n_iter": int(n_iter), "n_seeds": int(n_seeds),
              "functional": functional}
    return VerificationReport("ergodic_average", params, statistics, threshold, checks, seed.root)


# --------------------------------------------------------------------------
# deterministic checks

def _check_report(test, params, value, tol, key="max_error", op="<="):
    return VerificationReport(test, params, {key: float(value)}, {key: float(tol)}, ((key, op, key),))


@_timed
def transfer_modulus_check(alphas=(-0.4, 0.0, 0.5, 2.0), n_lam=401, lam_max=100.0, tol=1e-12):
    lam = np.linspace(-lam_max, lam_max, n_lam)
    err = max(float(np.max(np.abs(np.abs(transfer_function(a, lam)) - 1.0))) for a in alphas)
    return _check_report("transfer_modulus", {"alphas": alphas, "n_lambda": n_lam}, err, tol)


def homogeneity_lattice(n=50):
    """Deterministic ``(t, s)`` lattice with ``0 < s < t``."""
    r = np.linspace(0.05, 0.95, 10)
    t = np.array([0.3, 0.7, 1.0, 2.5, 4.0])
    tt, rr = np.meshgrid(t, r, indexing="ij")
    return tt.ravel()[:n], (tt * rr).ravel()[:n]


@_timed
def homogeneity_check(specs, scales=(0.5, 2.0, 10.0), tol=1e-10):
    """``z(a t, a s) = a^(beta - 1/2) z(t, s)`` on the lattice."""
    t, s = homogeneity_lattice()
    err = 0.0
    for spec in specs:
        base = kernel_eval(spec, t, s)
        for a in scales:
            scaled = kernel_eval(spec, a * t, a * s)
            ref = a ** (spec.beta - 0.5) * base
            err = max(err, float(np.max(np.abs(scaled - ref) / np.abs(ref))))
    return _check_report("homogeneity", {"specs": [s.label for s in specs], "scales": scales},
                         err, tol, key="max_rel_error")


@_timed
def kernel_identity_check(hursts=(0.25, 0.5, 0.75), alphas=(-0.25, 0.0, 1.0),
                          points=((0.5, 1.0), (1.0, 2.0), (0.1, 5.0)), tol=1e-6):
    res = [kernel_identity_residual(Fbm(H), a, s, t) for H in hursts for a in alphas for s, t in points]
    return _check_report("kernel_identity", {"hursts": hursts, "alphas": alphas, "points": points},
                         max(res), tol, key="max_residual")


def cov_lattice(n=20):
    """20 ``(s, t)`` pairs in ``(0, 3]``, including the diagonal."""
    x = np.array([0.1, 0.5, 1.0, 2.0, 3.0])
    s, t = np.meshgrid(x, x, indexing="ij")
    keep = s <= t
    return s[keep][:n], t[keep][:n]


@_timed
def kernel_cov_check(hursts=(0.3, 0.7), tol=1e-5):
    from .covariance import kernel_cov
    s, t = cov_lattice()
    err = 0.0
    for H in hursts:
        ref = fbm_cov(H, s, t)
        got = kernel_cov(CovarianceOracle(Fbm(H)), s, t)
        err = max(err, float(np.max(np.abs(got - ref) / np.abs(ref))))
    return _check_report("kernel_cov", {"hursts": hursts, "n_points": int(s.size)}, err, tol,
                         key="max_rel_error")


@_timed
def transform_cov_check(hursts=(0.5, 0.7), alphas=None, points=((1.0, 1.0), (1.0, 2.0)), tol=1e-4):
    """Deterministic measure preservation: ``Cov(Z_s, Z_t) = R(s, t)``.

    ``alphas`` defaults to ``(0, 0.2, H - 1/2)`` for each ``H``."""
    err = 0.0
    for H in hursts:
        oracle = CovarianceOracle(Fbm(H))
        for a in (alphas if alphas is not None else (0.0, 0.2, H - 0.5)):
            for s, t in points:
                r = float(oracle(s, t))
                err = max(err, abs(transform_cov_oracle(oracle, a, s, t) - r) / abs(r))
    return _check_report("transform_cov", {"hursts": hursts, "points": points}, err, tol,
                         key="max_rel_error")


@_timed
def closed_form_check(n=1024, betas=(0.25, 0.5, 0.7), alphas=(-0.25, 0.0, 0.2, 1.0), tol=1e-8):
    """``t^beta`` maps to ``-t^beta`` under every ``Z^alpha``."""
    grid = TimeGrid.uniform_grid(1.0, n)
    t = grid.points
    err = 0.0
    for b in betas:
        X = PathEnsemble(grid, t**b)
        for a in alphas:
            Z = z_alpha_forward(X, TransformParams(a, b))
            err = max(err, float(np.max(np.abs(Z.values[0] + t**b))))
    return _check_report("closed_form", {"n": n, "betas": betas, "alphas": alphas}, err, tol)


@_timed
def molchan_check(hursts=(0.25, 0.5, 0.75), n=256, N=4, seed=None):
    """``molchan`` is bit-identical to ``Z^(H - 1/2)`` with ``beta = H``."""
    seed = _as_seed(seed)
    grid = TimeGrid.uniform_grid(1.0, n)
    diffs = 0
    for H in hursts:
        X = synth_from_kernel(Fbm(H), grid, sample_bm_increments(grid, N, seed))
        a = molchan(X, H).values
        b = z_alpha_forward(X, TransformParams(H - 0.5, H, T=1.0, T_ext=2.0)).values
        diffs += int(np.count_nonzero(a != b))
    rep = _check_report("molchan", {"hursts": hursts, "n": n}, diffs, 0, key="n_differing")
    rep.seed = seed.root
    return rep


@_timed
def inverse_composition_check(H=0.7, alpha=0.2, T=1.0, T_ext=32.0, n=256, N=100, seed=None):
    """Forward then inverse on ``[0, T]`` from paths on ``[0, T_ext]``; the
    sup error must stay within the Richardson discretisation estimate plus
    the truncation bound, on every path."""
    seed = _as_seed(seed)
    grid = TimeGrid.extended(T, n, T_ext)
    if len(grid) % 2 == 0:
        grid = TimeGrid.extended(T, n, T_ext * (1 + 1e-3))
    X = sample_cholesky(CovarianceOracle(Fbm(H)), grid, N, seed)
    p = TransformParams(alpha, H, T=T, T_ext=grid.horizon)
    err, disc, trunc = composition_error(X, p)
    ratio = err / (disc + trunc)
    statistics = {"max_budget_ratio": float(np.max(ratio)), "max_error": float(np.max(err)),
                  "max_discretisation": float(np.max(disc)), "max_truncation": float(np.max(trunc))}
    return VerificationReport("inverse_composition", {"H": H, "alpha": alpha, "T": T, "T_ext": grid.horizon,
                                                      "n": n, "N": int(N)},
                              statistics, {"max_budget_ratio": 1.0},
                              (("max_budget_ratio", "<=", "max_budget_ratio"),), seed.root)


def bridge_cov(alpha, T, s, t):
    """Covariance of ``N^(alpha, T)``: ``(m^k - (st)^k / T^k) / k`` with
    ``m = min(s, t)``, ``k = 2 alpha + 1``."""
    k = 2 * alpha + 1
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    return (np.minimum(s, t) ** k - (s * t) ** k / T**k) / k


@_timed
def bridge_check(alpha, T=1.0, n=32, N=100_000, seed=None):
    """Endpoint exactly 0 and covariance within 4 SE of the closed form."""
    alpha = check_alpha(alpha)
    seed = _as_seed(seed)
    grid = TimeGrid.uniform_grid(T, n)
    t = grid.points[1:-1]
    R = bridge_cov(alpha, T, t[:, None], t[None, :])
    acc = np.zeros_like(R)
    endpoint = 0.0
    for first in range(0, int(N), BATCH):
        m = min(BATCH, int(N) - first)
        inc = sample_bm_increments(grid, m, seed, first=first)
        B = bridge(nalpha_path(alpha, grid, inc, rule="exact"), BridgeSpec(alpha, T))
        endpoint = max(endpoint, float(np.max(np.abs(B.values[:, -1]))))
        V = B.values[:, 1:-1]
        acc += V.T @ V
    emp = acc / N
    d = np.diag(R)
    se = gaussian_cov_se(d[:, None], d[None, :], R, N)
    iu = np.triu_indices(t.size)
    zmax = float(np.max(np.abs(emp - R)[iu] / se[iu]))
    statistics = {"endpoint_max_abs": endpoint, "max_abs_z": zmax}
    threshold = {"endpoint_max_abs": 0.0, "max_abs_z": SE_MULTIPLE}
    checks = (("endpoint_max_abs", "<=", "endpoint_max_abs"), ("max_abs_z", "<=", "max_abs_z"))
    return VerificationReport("bridge", {"alpha": alpha, "T": T, "n": n, "N": int(N)},
                              statistics, threshold, checks, seed.root)


def refinement_order(errors, ns):
    """Least-squares slope of ``-log error`` against ``log n``."""
    return float(-np.polyfit(np.log(ns), np.log(errors), 1)[0])


@_timed
def yh_representation_check(H, T=1.0, levels=(256, 512, 1024, 2048, 4096), N=20, seed=None,
                            min_order=0.5):
    """``Y^H`` against ``sqrt(2 - 2H) int s^(1-2H) dN^(H - 1/2, T)`` from the
    same noise: the sup gap must shrink under refinement with order at
    least ``min_order`` (the refinement-order tolerance)."""
    seed = _as_seed(seed)
    fine = TimeGrid.uniform_grid(T, levels[-1])
    inc = sample_bm_increments(fine, N, seed)
    gaps = []
    for n in levels:
        g = TimeGrid.uniform_grid(T, n)
        ii = coarsen_increments(inc, levels[-1] // n)
        a = yh_path(H, T, g, ii).values
        b = yh_representation(H, T, g, ii).values
        gaps.append(float(np.max(np.abs(a - b))))
    order = refinement_order(gaps, levels)
    statistics = {"order": order, "gaps": gaps}
    return VerificationReport("yh_representation", {"H": H, "T": T, "levels": levels, "N": N},
                              statistics, {"order": float(min_order)}, (("order", ">=", "order"),), seed.root)


# --------------------------------------------------------------------------
# suites

SUITES = ("kernels", "covariance", "transform", "bridges", "ergodic", "all")


def run_suite(name, seed=None):
    """Run a named suite; returns the list of reports."""
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {SUITES}")
    seed = _as_seed(seed)
    if name == "all":
        out = []
        for s in SUITES[:-1]:
            out.extend(run_suite(s, seed))
        return out
    if name == "kernels":
        specs = [Fbm(0.25), Fbm(0.5), Fbm(0.75), PowerMarkov(0.2, 0.7), PowerMarkov(-0.3, 0.2)]
        return [homogeneity_check(specs), kernel_identity_check()]
    if name == "covariance":
        grid = TimeGrid.uniform_grid(1.0, 16)
        oracle = CovarianceOracle(Fbm(0.3))
        X = sample_cholesky(oracle, grid, 10_000, seed)
        Xs = sample_cholesky(oracle, TimeGrid.uniform_grid(2.0, 16), 10_000, seed)
        return [kernel_cov_check(), transform_cov_check(),
                covariance_match(X, oracle, seed=seed.root),
                selfsimilarity_test(Xs, 0.3, 2.0, seed=seed.root)]
    if name == "transform":
        grid = TimeGrid.uniform_grid(1.0, 64)
        return [transfer_modulus_check(), closed_form_check(), molchan_check(seed=seed),
                inverse_composition_check(seed=seed),
                measure_preservation_test(Fbm(0.7), 0.2, grid, 10_000, seed),
                measure_preservation_test(Fbm(0.7), 0.2, grid, 10_000, seed, skip_transform=True)]
    if name == "bridges":
        return [bridge_check(0.0, seed=seed), bridge_check(0.5, seed=seed),
                iterate_orthogonality(0.0, 1.0, 4, 100_000, seed)[1],
                span_equality_residual(Fbm(0.75), 0.25, 1.0, 16, 100_000, seed),
                span_equality_residual(Fbm(0.75), 0.25, 1.0, 16, 100_000, seed, control=True),
                yh_representation_check(0.25, seed=seed), yh_representation_check(0.75, seed=seed)]
    # ergodic
    return [ergodic_average_test(Fbm(0.7), 0.2, 1.0, 200, 100, "sign_at_T", seed),
            ergodic_average_test(PowerMarkov(0.2, 0.7), 0.2, 1.0, 200, 400, "sign_at_T", seed)]
