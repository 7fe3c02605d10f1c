"""The transformation ``Z^alpha``, its inverse and iterates.

For a ``beta``-self-similar path ``X``

    Z^alpha_t(X) = X_t - (2 alpha + 1) t^(beta - alpha - 1/2)
                   int_0^t s^(alpha - beta - 1/2) X_s ds,

    inverse:  X_t - (2 alpha + 1) t^(alpha + beta + 1/2)
                   int_t^inf X_s s^(-beta - alpha - 3/2) ds.

Discretisation: on each grid cell ``X`` is interpolated linearly in
``s^beta`` (so ``X_s = s^beta`` is reproduced exactly) and the power weight
is integrated exactly against the interpolant.  On ``[0, t_1]`` the path is
continued by its scaling profile ``X_{t_1} (s / t_1)^beta``.
"""
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import GridMismatchError, HorizonError
from .kernels import check_alpha, check_hurst
from .simulate import PathEnsemble, StationaryEnsemble, synthesis_weights

MIN_EXTENSION = 2.0
DEFAULT_EXTENSION = 32.0
TAIL_SIGMAS = 4.0


@dataclass(frozen=True)
class TransformParams:
    alpha: float
    beta: float
    T: float = 1.0
    T_ext: float = None

    def __post_init__(self):
        object.__setattr__(self, "alpha", check_alpha(self.alpha))
        b = float(self.beta)
        if not b > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        object.__setattr__(self, "beta", b)
        T = float(self.T)
        if not T > 0:
            raise ValueError("T must be positive")
        object.__setattr__(self, "T", T)
        T_ext = DEFAULT_EXTENSION * T if self.T_ext is None else float(self.T_ext)
        if not T_ext / T >= MIN_EXTENSION * (1 - 1e-9):
            raise HorizonError(f"T_ext/T must be at least {MIN_EXTENSION}, got {T_ext / T:g}")
        object.__setattr__(self, "T_ext", T_ext)

    @property
    def a(self):
        return self.alpha + 0.5

    @property
    def k(self):
        return 2.0 * self.alpha + 1.0


def _expm1_ratio(c, L):
    """``(exp(c L) - 1) / c``, equal to ``L`` at ``c = 0``."""
    if c == 0.0:
        return L
    return np.expm1(c * L) / c


def cell_weights(t, p, beta):
    """Weights ``(wl, wr)`` with

        int_{t_j}^{t_j+1} s^p X_s ds = wl_j X(t_j) + wr_j X(t_j+1)

    for ``X`` linear in ``s^beta`` on the cell; ``t`` must be positive.
    """
    lo, hi = t[:-1], t[1:]
    L = np.log(hi) - np.log(lo)
    c = p + 1.0
    base = lo**c
    i0 = base * _expm1_ratio(c, L)
    # int (s^beta - lo^beta) s^p ds / (hi^beta - lo^beta)
    diff = _expm1_ratio(c + beta, L) - _expm1_ratio(c, L)
    wr = base * diff / np.expm1(beta * L)
    return i0 - wr, wr


def _forward_values(t, X, alpha, beta, interp=None, profile=None):
    """Forward transform of rows of ``X`` on points ``t`` (``t[0] == 0``).

    ``interp``: cells interpolate linearly in ``s^interp`` (default ``beta``).
    ``profile``: on ``[0, t_1]`` the path is ``X_1 (s / t_1)^profile``
    (default ``beta``).
    """
    interp = beta if interp is None else interp
    profile = beta if profile is None else profile
    a = alpha + 0.5
    k = 2 * alpha + 1
    p = alpha - beta - 0.5
    out = np.zeros_like(X)
    if t.size < 2:
        return out
    tp = t[1:]
    wl, wr = cell_weights(tp, p, interp)
    first = X[:, 1] * tp[0] ** (p + 1) / (p + 1 + profile)
    cells = X[:, 1:-1] * wl + X[:, 2:] * wr
    integral = np.concatenate([first[:, None], first[:, None] + np.cumsum(cells, axis=1)], axis=1)
    out[:, 1:] = X[:, 1:] - k * tp ** (beta - a) * integral
    return out


def z_alpha_forward(ensemble, p):
    """Apply ``Z^alpha`` to every path of ``ensemble`` (grid starting at 0)."""
    if not ensemble.grid.starts_at_zero:
        raise GridMismatchError("the forward transform needs a grid starting at 0")
    vals = _forward_values(ensemble.grid.points, ensemble.values, p.alpha, p.beta)
    return ensemble.with_values(vals, transform=f"Z^{p.alpha!r}")


def molchan(ensemble, H):
    """``Z_t = X_t - 2H int_0^t X_s / s ds``: ``Z^alpha`` with ``alpha = H - 1/2``."""
    H = check_hurst(H)
    return z_alpha_forward(ensemble, TransformParams(alpha=H - 0.5, beta=H, T=ensemble.grid.horizon,
                                                     T_ext=MIN_EXTENSION * ensemble.grid.horizon))


@dataclass
class InverseResult:
    ensemble: PathEnsemble
    trunc_bound: np.ndarray  # (n_paths, n_points) bound on the tail truncation error


def tail_constant(ensemble, beta, T, n_sigma=TAIL_SIGMAS):
    """Estimate of ``sup |X_s| / s^beta`` beyond the last grid point.

    The omitted tail enters as an ``exp(-a v)``-weighted average of the
    Lamperti process ``X_s / s^beta``, so per path the estimate is the larger
    of its observed maximum on ``[T, T_ext]`` and ``n_sigma`` times the
    ensemble root-mean-square of ``X_s / s^beta`` there.
    """
    t = ensemble.grid.points
    tail = t >= T * (1 - 1e-12)
    Y = np.abs(ensemble.values[:, tail]) / t[tail] ** beta
    return np.maximum(np.max(Y, axis=1), n_sigma * np.sqrt(np.mean(Y**2)))


def _inverse_values(t, X, alpha, beta):
    """Truncated inverse transform at every grid point (``t > 0`` part)."""
    a = alpha + 0.5
    k = 2 * alpha + 1
    p = -beta - alpha - 1.5
    out = np.zeros_like(X)
    pos = t > 0
    tp = t[pos]
    Xp = X[:, pos]
    wl, wr = cell_weights(tp, p, beta)
    cells = Xp[:, :-1] * wl + Xp[:, 1:] * wr
    # integral from t_i to T_ext: reversed cumulative sum
    tail = np.zeros_like(Xp)
    tail[:, :-1] = np.cumsum(cells[:, ::-1], axis=1)[:, ::-1]
    out[:, pos] = Xp - k * tp ** (a + beta) * tail
    return out


def z_alpha_inverse(ensemble, p):
    """Inverse transform on ``[0, T]`` from an ensemble on ``[0, T_ext]``.

    The integral to infinity is truncated at the last grid point; the
    returned bound on the omitted part is

        2 C t^(alpha + beta + 1/2) T_ext^(-alpha - 1/2),

    with ``C`` from :func:`tail_constant` (an estimate: the tail itself is
    not observed).
    """
    g = ensemble.grid
    T_end = g.horizon
    if not T_end > p.T * (1 + 1e-12):
        raise HorizonError(f"input horizon {T_end:g} does not extend beyond T = {p.T:g}")
    if T_end < p.T_ext * (1 - 1e-9):
        raise HorizonError(f"input horizon {T_end:g} is shorter than T_ext = {p.T_ext:g}")
    vals = _inverse_values(g.points, ensemble.values, p.alpha, p.beta)
    sub, keep = g.restrict(p.T)
    C = tail_constant(ensemble, p.beta, p.T)
    bound = 2.0 * C[:, None] * sub.points ** (p.a + p.beta) * T_end ** (-p.a)
    out = PathEnsemble(sub, vals[:, keep], dict(ensemble.meta, transform=f"Z^{p.alpha!r},-1"))
    return InverseResult(out, bound)


def inverse_horizons(p, n):
    """Nested horizons ``T_ext = H_0 > H_1 > ... > H_n = T`` for ``n``
    inverse applications, geometrically spaced."""
    ratio = (p.T_ext / p.T) ** (1.0 / n)
    if ratio < MIN_EXTENSION * (1 - 1e-12):
        raise HorizonError(
            f"T_ext/T = {p.T_ext / p.T:g} is too short for {n} inverse steps "
            f"(each needs an extension factor of {MIN_EXTENSION:g})"
        )
    return [p.T * ratio ** (n - j) for j in range(n + 1)]


def z_alpha_iterate(ensemble, p, n):
    """The ``n``-th iterate of ``Z^alpha`` (``n < 0``: of the inverse).

    Negative iterates shrink the horizon from ``T_ext`` to ``T`` over
    ``|n|`` steps; the truncation bounds of the steps are not propagated.
    """
    n = int(n)
    if n == 0:
        return ensemble
    if n > 0:
        out = ensemble
        for _ in range(n):
            out = z_alpha_forward(out, p)
        return out
    if ensemble.grid.horizon < p.T_ext * (1 - 1e-9):
        raise HorizonError(f"input horizon {ensemble.grid.horizon:g} is shorter than T_ext = {p.T_ext:g}")
    out = ensemble
    H = inverse_horizons(p, -n)
    for j in range(-n):
        # each step starts from the horizon the previous one actually reached
        step = TransformParams(p.alpha, p.beta, T=H[j + 1], T_ext=out.grid.horizon)
        out = z_alpha_inverse(out, step).ensemble
    return out


def transfer_function(alpha, lam):
    """``H^alpha(lambda) = (-(alpha + 1/2) + i lambda) / ((alpha + 1/2) + i lambda)``."""
    a = check_alpha(alpha) + 0.5
    lam = np.asarray(lam, dtype=float)
    out = (-a + 1j * lam) / (a + 1j * lam)
    return out[()] if out.ndim == 0 else out


def impulse_response(alpha, x):
    """Absolutely continuous part ``-(2 alpha + 1) exp(-(alpha + 1/2) x)``,
    ``x > 0``, of the Lamperti-domain impulse response (the unit mass at 0
    is the identity term)."""
    alpha = check_alpha(alpha)
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("impulse_response is defined for x > 0")
    out = -(2 * alpha + 1) * np.exp(-(alpha + 0.5) * x)
    return out[()] if out.ndim == 0 else out


def lamperti_forward(ensemble, alpha, beta):
    """``Z^alpha`` acting on a Lamperti-domain ensemble.

    Uses the same discretisation as the time-domain operator on the grid
    ``{0} U exp(u)``.  With ``a = alpha + 1/2`` and
    ``S_j = t_j^(-a) int_0^(t_j) s^(alpha - beta - 1/2) X_s ds`` (so that
    ``Y^alpha = Y - (2 alpha + 1) S``), the recursion

        S_j = e^(-a du) (S_(j-1) + wl Y_(j-1) + e^(beta du) wr Y_j),
        S_0 = Y_0 / a,

    is run as a first-order IIR filter.
    """
    du = ensemble.step
    if du is None:
        raise GridMismatchError("need at least two Lamperti points")
    u = ensemble.u
    if np.max(np.abs(np.diff(u) - du)) > 1e-9 * max(1.0, np.max(np.abs(u))):
        raise GridMismatchError("Lamperti grid must be uniform")
    alpha = check_alpha(alpha)
    a = alpha + 0.5
    k = 2 * alpha + 1
    p = alpha - beta - 0.5
    wl, wr = cell_weights(np.array([1.0, np.exp(du)]), p, beta)
    decay = np.exp(-a * du)
    Y = ensemble.values
    drive = np.zeros_like(Y)
    drive[:, 1:] = decay * (wl[0] * Y[:, :-1] + np.exp(beta * du) * wr[0] * Y[:, 1:])
    drive[:, 0] = Y[:, 0] / a
    S = lfilter([1.0], [1.0, -decay], drive, axis=1)
    return StationaryEnsemble(u, Y - k * S, dict(ensemble.meta, transform=f"Z^{alpha!r}"))


def lamperti_iterates(ensemble, alpha, beta, n_iter, keep=-1):
    """Values at column ``keep`` of the iterates ``n = 0..n_iter`` of
    ``lamperti_forward``; shape ``(n_paths, n_iter + 1)``."""
    out = np.empty((ensemble.n_paths, n_iter + 1))
    cur = ensemble
    out[:, 0] = cur.values[:, keep]
    for j in range(1, n_iter + 1):
        cur = lamperti_forward(cur, alpha, beta)
        out[:, j] = cur.values[:, keep]
    return out


def commutation_check(spec, grid, increments, alpha, per_path=False):
    """Sup-norm gap between the two sides of

        Z^alpha_t(X) = int_0^t z(t, s) dZ^alpha_s(W),

    with ``X`` synthesised from ``W`` and ``Z^alpha(W)`` taken with
    ``beta = 1/2``.  Returns the maximum over paths, or per-path values.

    Both sides approximate the conditional expectation given the grid
    increments: ``X`` uses mean-moment synthesis weights, both paths are
    interpolated linearly within cells, and on ``[0, t_1]`` each path follows its
    conditional profile ``(s / t_1)^(beta + 1/2)``.
    """
    if not grid.uniform or not grid.starts_at_zero:
        raise GridMismatchError("commutation check needs a uniform grid from 0")
    inc = np.atleast_2d(np.asarray(increments, dtype=float))
    if inc.shape[1] != len(grid) - 1:
        raise GridMismatchError("increments do not match the grid cells")
    t = grid.points
    K = synthesis_weights(spec, grid, moments="mean")
    A = _forward_values(t, inc @ K.T, alpha, spec.beta, interp=1.0, profile=spec.beta + 0.5)
    W = np.concatenate([np.zeros((inc.shape[0], 1)), np.cumsum(inc, axis=1)], axis=1)
    ZW = _forward_values(t, W, alpha, 0.5, interp=1.0, profile=1.0)
    B = np.diff(ZW, axis=1) @ K.T
    gap = np.max(np.abs(A - B), axis=1)
    return gap if per_path else float(np.max(gap))


def composition_error(ensemble, p):
    """Sup-norm error of inverse(forward(X)) against ``X`` on ``[0, T]``,
    with the discretisation part estimated by Richardson comparison
    against the same composition on every other grid point.

    Returns ``(error, discretisation_budget, truncation_bound)``, each per path.
    """
    def compose(ens):
        fwd = z_alpha_forward(ens, p)
        return z_alpha_inverse(fwd, p)

    fine = compose(ensemble)
    coarse_grid = ensemble.grid.subsample(2)
    if coarse_grid.horizon < ensemble.grid.horizon:
        raise GridMismatchError("subsampled grid must keep the horizon; use an odd number of points")
    coarse = compose(PathEnsemble(coarse_grid, ensemble.values[:, ::2]))
    _, keep = ensemble.grid.restrict(p.T)
    err = np.max(np.abs(fine.ensemble.values - ensemble.values[:, keep]), axis=1)
    # both compositions share the even points; error order >= 1/2 assumed
    shared = fine.ensemble.values[:, ::2]
    m = min(shared.shape[1], coarse.ensemble.values.shape[1])
    diff = np.abs(shared[:, :m] - coarse.ensemble.values[:, :m])
    disc = np.max(diff, axis=1) / (np.sqrt(2.0) - 1.0)
    trunc = np.max(fine.trunc_bound, axis=1)
    return err, disc, trunc
