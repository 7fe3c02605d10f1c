"""Time grids, seeded Brownian increments, path synthesis and the Lamperti
transform."""
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky, toeplitz

from .covariance import cov_matrix, kernel_cov_quad, stationary_cov
from .errors import GridMismatchError, NotPositiveDefiniteError
from .kernels import reduced_kernel, unit_cell_average

DEFAULT_SEED = 20240611


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing, finite time points.

    ``log_step`` is set for Lamperti grids ``exp(u0 + k du)``; ``horizon`` is
    the end of the simulated window of interest when the grid extends past it.
    """

    points: np.ndarray
    uniform: bool = False
    step: float = None
    log_step: float = None

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("a grid needs at least one point")
        if not np.all(np.isfinite(p)):
            raise ValueError("grid points must be finite")
        if p[0] < 0:
            raise ValueError("grid points must be non-negative")
        if np.any(np.diff(p) <= 0):
            raise ValueError("grid points must be strictly increasing")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    @classmethod
    def uniform_grid(cls, T, n):
        """``n + 1`` equally spaced points on ``[0, T]``."""
        T = float(T)
        if not T > 0 or int(n) < 1:
            raise ValueError("need T > 0 and n >= 1")
        n = int(n)
        return cls(T * np.arange(n + 1) / n, uniform=True, step=T / n)

    @classmethod
    def extended(cls, T, n, T_ext):
        """Uniform on ``[0, T]`` with ``n`` cells, then geometric up to ``T_ext``
        with ratio ``1 + 1/n`` (so cells at ``T`` match in size)."""
        T, T_ext = float(T), float(T_ext)
        if not T_ext > T:
            raise ValueError("T_ext must exceed T")
        base = T * np.arange(n + 1) / n
        m = int(np.ceil(np.log(T_ext / T) / np.log1p(1.0 / n)))
        tail = T * np.exp(np.log(T_ext / T) * np.arange(1, m + 1) / m)
        tail[-1] = T_ext
        return cls(np.concatenate([base, tail]))

    @classmethod
    def lamperti(cls, u0, du, m, with_origin=False):
        """``exp(u0 + k du)``, ``k = 0..m-1``; optionally preceded by 0."""
        u = u0 + du * np.arange(int(m))
        pts = np.exp(u)
        if with_origin:
            pts = np.concatenate([[0.0], pts])
        return cls(pts, log_step=float(du))

    def __len__(self):
        return self.points.size

    @property
    def starts_at_zero(self):
        return self.points[0] == 0.0

    @property
    def horizon(self):
        return float(self.points[-1])

    @property
    def widths(self):
        return np.diff(self.points)

    def index_of(self, t, rtol=1e-12):
        """Index of the grid point equal to ``t`` (relative tolerance)."""
        i = int(np.argmin(np.abs(self.points - t)))
        if abs(self.points[i] - t) > rtol * max(abs(t), 1.0):
            raise GridMismatchError(f"time {t} is not a grid point")
        return i

    def restrict(self, T):
        """Grid points ``<= T`` (with a small relative slack)."""
        keep = self.points <= T * (1 + 1e-12)
        pts = self.points[keep]
        return TimeGrid(pts, uniform=self.uniform, step=self.step, log_step=self.log_step), keep

    def subsample(self, factor):
        """Every ``factor``-th point, starting at the first."""
        pts = self.points[::factor]
        step = None if self.step is None else self.step * factor
        lstep = None if self.log_step is None else self.log_step * factor
        return TimeGrid(pts, uniform=self.uniform, step=step, log_step=lstep)


@dataclass
class PathEnsemble:
    grid: TimeGrid
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[None, :]
        if v.ndim != 2 or v.shape[1] != len(self.grid):
            raise GridMismatchError(
                f"values of shape {v.shape} do not match a grid of {len(self.grid)} points"
            )
        if self.grid.starts_at_zero and np.any(v[:, 0] != 0.0):
            raise ValueError("paths on a grid starting at 0 must vanish there")
        self.values = v

    @property
    def n_paths(self):
        return self.values.shape[0]

    @property
    def times(self):
        return self.grid.points

    def at(self, t):
        return self.values[:, self.grid.index_of(t)]

    def with_values(self, values, **meta):
        m = dict(self.meta)
        m.update(meta)
        return PathEnsemble(self.grid, values, m)


@dataclass(frozen=True)
class Seed:
    """Root seed with one independent Philox stream per replicate index.

    The stream for replicate ``r`` depends only on ``(root, r)``, so
    ensembles are reproducible regardless of how rows are batched.
    """

    root: int = DEFAULT_SEED

    def __post_init__(self):
        r = int(self.root)
        if not 0 <= r < 2**64:
            raise ValueError("seed root must be a 64-bit unsigned integer")
        object.__setattr__(self, "root", r)

    def generator(self, replicate, purpose=0):
        ss = np.random.SeedSequence(self.root, spawn_key=(int(purpose), int(replicate)))
        return np.random.Generator(np.random.Philox(ss))

    def normals(self, n_rows, n_cols, first=0, purpose=0):
        """Standard normal matrix; row ``i`` comes from replicate ``first + i``."""
        out = np.empty((int(n_rows), int(n_cols)))
        for i in range(out.shape[0]):
            out[i] = self.generator(first + i, purpose).standard_normal(out.shape[1])
        return out


def _as_seed(seed):
    return seed if isinstance(seed, Seed) else Seed(DEFAULT_SEED if seed is None else seed)


def sample_bm_increments(grid, n_paths, seed, first=0, purpose=0):
    """Brownian increments over the cells of ``grid``, shape ``(n_paths, n-1)``."""
    if int(n_paths) < 1:
        raise ValueError("n_paths must be positive")
    seed = _as_seed(seed)
    return seed.normals(n_paths, len(grid) - 1, first, purpose) * np.sqrt(grid.widths)


def coarsen_increments(increments, factor):
    """Sum consecutive groups of ``factor`` increments (a coarser grid)."""
    inc = np.asarray(increments, dtype=float)
    n = inc.shape[-1]
    if n % factor:
        raise GridMismatchError("number of cells is not divisible by the factor")
    return inc.reshape(inc.shape[:-1] + (n // factor, factor)).sum(axis=-1)


def _power_average(lo, hi, p):
    """Average of ``x^p`` over ``[lo, hi]`` (``0 <= lo < hi``)."""
    if p == 0.0:
        return np.ones(np.broadcast(lo, hi).shape)
    # (hi^(p+1) - lo^(p+1)) / ((p+1)(hi - lo)), written to avoid cancellation
    with np.errstate(divide="ignore", invalid="ignore"):
        L = np.log(hi) - np.log(lo)
        val = hi**p * -np.expm1(-(p + 1) * L) / ((p + 1) * -np.expm1(-L))
    return np.where(lo > 0, val, hi**p / (p + 1))


def synthesis_weights(spec, grid, moments="rms"):
    """Lower-triangular ``W`` with ``X(t_i) = sum_j W[i, j] dW_j``.

    Write ``z(t, s) = s^e (t - s)^d g(t, s)`` with the origin and diagonal
    exponents ``e`` and ``d``; ``g`` is taken at the cell midpoint and the
    power factors are replaced by exact cell moments.

    ``moments='rms'`` (law-preserving):

    * ``s^e`` by its root-mean-square over the cell.  Every row shares this
      profile, so both variances and cross-covariances keep the correct
      ``int s^(2e)`` mass near the origin.
    * ``(t_i - s)^d`` by its mean on cells below the diagonal and by its
      root-mean-square on the diagonal cell (where it only enters the
      variance of ``X(t_i)`` to leading order).

    ``moments='mean'`` uses cell means throughout, i.e. the conditional
    expectation of ``X(t_i)`` given the increments; it converges pathwise
    but loses variance next to the singularities.

    The cell ``[0, t_1]`` at ``t_1`` uses the exact scaled unit-cell RMS
    (``'rms'``) or mean (``'mean'``) of ``z(1, .)``.
    """
    if moments not in ("rms", "mean"):
        raise ValueError(f"unknown moments {moments!r}; choose 'rms' or 'mean'")
    if not grid.starts_at_zero:
        raise GridMismatchError("synthesis grids must start at 0")
    t = grid.points
    n = t.size - 1
    lo, hi = t[:-1], t[1:]
    mid = 0.5 * (lo + hi)
    d = spec.diag_exponent
    e = spec.origin_exponent
    if moments == "rms":
        origin = np.sqrt(_power_average(lo, hi, 2 * e)) / mid**e
        diag_cell = 1.0 / np.sqrt(2 * d + 1)
    else:
        origin = _power_average(lo, hi, e) / mid**e
        diag_cell = 1.0 / (d + 1)
    W = np.zeros((n + 1, n))
    rows, cols = np.tril_indices(n + 1, -2)  # cells j <= i - 2
    if rows.size:
        ti = t[rows]
        diag = _power_average(ti - hi[cols], ti - lo[cols], d)
        W[rows, cols] = reduced_kernel(spec, ti, mid[cols]) * diag * origin[cols]
    k = np.arange(1, n)  # diagonal cells of rows 2..n
    if k.size:
        h = hi[k] - lo[k]
        W[k + 1, k] = reduced_kernel(spec, t[k + 1], mid[k]) * h**d * diag_cell * origin[k]
    unit = np.sqrt(kernel_cov_quad(spec, 1.0, 1.0)) if moments == "rms" else unit_cell_average(spec)
    W[1, 0] = (t[1] - t[0]) ** (spec.beta - 0.5) * unit
    return W


def synth_from_kernel(spec, grid, increments, meta=None):
    """Paths ``X(t_i) = sum_j W[i, j] dW_j`` of the Volterra process."""
    inc = np.atleast_2d(np.asarray(increments, dtype=float))
    if inc.shape[1] != len(grid) - 1:
        raise GridMismatchError("increments do not match the grid cells")
    W = synthesis_weights(spec, grid)
    m = {"spec": spec.label, "beta": spec.beta, "method": "volterra"}
    m.update(meta or {})
    return PathEnsemble(grid, inc @ W.T, m)


def sample_cholesky(oracle, grid, n_paths, seed, jitter=False, first=0):
    """Exact Gaussian sampling of the process on ``grid`` from ``R``."""
    seed = _as_seed(seed)
    C = cov_matrix(oracle, grid, jitter=jitter)
    L = C.cholesky()
    pos = grid.points > 0
    vals = np.zeros((int(n_paths), len(grid)))
    vals[:, pos] = seed.normals(n_paths, int(pos.sum()), first) @ L.T
    meta = {"spec": oracle.spec.label, "beta": oracle.beta, "seed": seed.root, "method": "cholesky"}
    return PathEnsemble(grid, vals, meta)


def _check_lamperti_grid(grid, rtol=1e-9):
    t = grid.points
    if t[0] <= 0:
        raise GridMismatchError("Lamperti grids must exclude 0")
    u = np.log(t)
    du = np.diff(u)
    if du.size and np.max(np.abs(du - du.mean())) > rtol * max(1.0, np.max(np.abs(u))):
        raise GridMismatchError("grid is not exponential in time")
    return u


def lamperti(ensemble, beta):
    """``Y(u) = exp(-beta u) X(exp(u))`` on ``u = log t``.

    The input grid must be ``exp`` of a uniform grid; the result is a
    StationaryEnsemble indexed by ``u``.
    """
    u = _check_lamperti_grid(ensemble.grid)
    vals = np.exp(-beta * u) * ensemble.values
    meta = dict(ensemble.meta)
    meta["lamperti_beta"] = float(beta)
    return StationaryEnsemble(u, vals, meta)


@dataclass
class StationaryEnsemble:
    """Paths of a stationary process on a uniform grid of Lamperti times ``u``."""

    u: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.values.shape[1] != self.u.size:
            raise GridMismatchError("values do not match the Lamperti grid")

    @property
    def step(self):
        return float(self.u[1] - self.u[0]) if self.u.size > 1 else None

    @property
    def n_paths(self):
        return self.values.shape[0]

    def to_time_domain(self, beta):
        """Invert the Lamperti transform: ``X(t) = t^beta Y(log t)``."""
        t = np.exp(self.u)
        return PathEnsemble(TimeGrid(t, log_step=self.step), t**beta * self.values, dict(self.meta))


def stationary_factor(oracle, m, du):
    """Cholesky factor of the stationary covariance on ``m`` points spaced ``du``."""
    rho = stationary_cov(oracle, du * np.arange(int(m)))
    try:
        return cholesky(toeplitz(rho), lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        lam = float(np.linalg.eigvalsh(toeplitz(rho))[0])
        raise NotPositiveDefiniteError(
            f"stationary covariance is not positive definite (smallest eigenvalue {lam:.3e})",
            min_eigenvalue=lam,
        ) from None


def sample_stationary(oracle, u0, du, m, n_paths, seed, first=0, factor=None):
    """Exact samples of the Lamperti transform of the process on
    ``u = u0 + k du``, ``k < m``, by Cholesky of the Toeplitz covariance."""
    seed = _as_seed(seed)
    L = stationary_factor(oracle, m, du) if factor is None else factor
    vals = seed.normals(n_paths, m, first) @ L.T
    u = u0 + du * np.arange(int(m))
    meta = {"spec": oracle.spec.label, "beta": oracle.beta, "seed": seed.root, "method": "stationary-cholesky"}
    return StationaryEnsemble(u, vals, meta)


def sample_stationary_circulant(oracle, u0, du, m, n_paths, seed, first=0, purpose=0):
    """Exact samples of the Lamperti transform by circulant embedding.

    The autocovariance on ``m`` lags is embedded in a circulant matrix of
    size ``2(m - 1)``; its eigenvalues must be non-negative (tiny negative
    round-off is clipped).
    """
    seed = _as_seed(seed)
    m = int(m)
    if m < 2:
        raise ValueError("circulant embedding needs at least two points")
    rho = stationary_cov(oracle, du * np.arange(m))
    row = np.concatenate([rho, rho[-2:0:-1]])
    M = row.size
    lam = np.fft.fft(row).real
    if lam.min() < -1e-10 * lam.max():
        raise NotPositiveDefiniteError(
            f"circulant embedding is not non-negative (smallest eigenvalue {lam.min():.3e})",
            min_eigenvalue=float(lam.min()),
        )
    amp = np.sqrt(np.clip(lam, 0.0, None) / M)
    xi = seed.normals(n_paths, 2 * M, first, purpose)
    vals = np.fft.fft(amp * (xi[:, :M] + 1j * xi[:, M:]), axis=1).real[:, :m]
    u = u0 + du * np.arange(m)
    meta = {"spec": oracle.spec.label, "beta": oracle.beta, "seed": seed.root, "method": "circulant"}
    return StationaryEnsemble(u, vals, meta)


def sample_ou(alpha, u0, du, m, n_paths, seed, first=0):
    """Exact samples of the Lamperti transform of ``N^alpha``: a stationary
    AR(1) with variance ``1/(2 alpha + 1)`` and lag-one correlation
    ``exp(-(alpha + 1/2) du)``."""
    from scipy.signal import lfilter

    seed = _as_seed(seed)
    a = alpha + 0.5
    phi = np.exp(-a * du)
    var = 1.0 / (2 * alpha + 1)
    eps = seed.normals(n_paths, m, first)
    eps[:, 1:] *= np.sqrt(var * (1 - phi * phi))
    eps[:, 0] *= np.sqrt(var)
    vals = lfilter([1.0], [1.0, -phi], eps, axis=1)
    u = u0 + du * np.arange(int(m))
    return StationaryEnsemble(u, vals, {"spec": f"nalpha(alpha={alpha!r})", "beta": a,
                                        "seed": seed.root, "method": "ou-exact"})
