"""The martingale ``N^alpha``, its bridge, the fundamental martingale of fBm,
the functional ``xi`` and the process ``Y^H``.

Stochastic integrals are discretised on the cells of the driving grid with
the integrand taken at the cell midpoint; on the first cell, where power
integrands are not smooth, the exact power moment is used instead.
"""
from dataclasses import dataclass

import numpy as np

from .errors import GridMismatchError
from .kernels import check_alpha, check_hurst
from .simulate import PathEnsemble

RULES = ("midpoint", "exact")


@dataclass(frozen=True)
class BridgeSpec:
    alpha: float
    T: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", check_alpha(self.alpha))
        if not float(self.T) > 0:
            raise ValueError("bridge horizon T must be positive")
        object.__setattr__(self, "T", float(self.T))


def _check_driving(grid, increments):
    if not grid.starts_at_zero:
        raise GridMismatchError("stochastic integrals need a grid starting at 0")
    inc = np.atleast_2d(np.asarray(increments, dtype=float))
    if inc.shape[1] != len(grid) - 1:
        raise GridMismatchError("increments do not match the grid cells")
    return inc


def _cumulative(grid, weighted, meta):
    zeros = np.zeros((weighted.shape[0], 1))
    return PathEnsemble(grid, np.concatenate([zeros, np.cumsum(weighted, axis=1)], axis=1), meta)


def power_weights(grid, p, rule="midpoint"):
    """Per-cell weights for ``int s^p dW``.

    ``midpoint``: ``m_j^p``, with the exact mean of ``s^p`` on the first
    cell (where ``s^p`` is not smooth).  ``exact``: root-mean-square of
    ``s^p`` on every cell, which reproduces the law of the integral exactly
    (independent Gaussian increments with the right variances).
    """
    if rule not in RULES:
        raise ValueError(f"unknown rule {rule!r}; choose from {RULES}")
    t = grid.points
    lo, hi = t[:-1], t[1:]
    if rule == "exact":
        if p == 0:
            return np.ones(lo.size)
        q = 2 * p + 1
        with np.errstate(divide="ignore", invalid="ignore"):
            L = np.log(hi) - np.log(lo)
            msq = hi ** (2 * p) * -np.expm1(-q * L) / (q * -np.expm1(-L))
        msq = np.where(lo > 0, msq, hi ** (2 * p) / q)
        return np.sqrt(msq)
    w = (0.5 * (lo + hi)) ** p
    if lo[0] == 0.0:
        w[0] = hi[0] ** p / (p + 1)
    return w


def nalpha_path(alpha, grid, increments, rule="midpoint"):
    """``N^alpha_t = int_0^t s^alpha dW_s`` on ``grid``."""
    alpha = check_alpha(alpha)
    inc = _check_driving(grid, increments)
    w = power_weights(grid, alpha, rule)
    meta = {"spec": f"nalpha(alpha={alpha!r})", "beta": alpha + 0.5, "method": rule}
    return _cumulative(grid, inc * w, meta)


def bridge(ensemble, spec):
    """``N^(alpha,T)_t = N_t - (t/T)^(2 alpha + 1) N_T`` on ``[0, T]``."""
    g = ensemble.grid
    iT = g.index_of(spec.T)
    sub, keep = g.restrict(spec.T)
    # dividing by the grid's own T point makes the endpoint factor exactly 1
    ratio = sub.points / g.points[iT]
    NT = ensemble.values[:, iT]
    vals = ensemble.values[:, keep] - ratio ** (2 * spec.alpha + 1) * NT[:, None]
    return PathEnsemble(sub, vals, dict(ensemble.meta, bridge_T=spec.T))


def fundamental_martingale(H, grid, increments, rule="midpoint"):
    """``M^H_t = sqrt(2 - 2H) int_0^t s^(1/2 - H) dW_s``."""
    H = check_hurst(H)
    N = nalpha_path(0.5 - H, grid, increments, rule)
    meta = dict(N.meta, spec=f"fundamental_martingale(H={H!r})", beta=1.0 - H)
    return PathEnsemble(grid, np.sqrt(2 - 2 * H) * N.values, meta)


def xi(H, T, M):
    """``xi^H_T = 2H int_0^T (s/T)^(2H - 1) dM^H_s`` per path.

    Midpoint weights on the increments of ``M``.  On the first cell the
    weight is the ratio of exact moments

        int_0^h (s/T)^(2H-1) s^(1/2-H) ds / int_0^h s^(1/2-H) ds,

    i.e. the average of ``(s/T)^(2H-1)`` against the density of ``dM``.
    """
    H = check_hurst(H)
    g = M.grid
    iT = g.index_of(T)
    t = g.points[: iT + 1]
    dM = np.diff(M.values[:, : iT + 1], axis=1)
    mid = 0.5 * (t[:-1] + t[1:])
    w = (mid / T) ** (2 * H - 1)
    if t[0] == 0.0:
        w[0] = (t[1] / T) ** (2 * H - 1) * (1.5 - H) / (H + 0.5)
    return 2 * H * dM @ w


def xi_variance(H, T):
    """``Var(xi^H_T) = (2H)^2 (2 - 2H) int_0^T (s/T)^(4H-2) s^(1-2H) ds``."""
    H = check_hurst(H)
    return (2 * H) ** 2 * (2 - 2 * H) * T ** (2 - 2 * H) / (2 * H)


def yh_path(H, T, grid, increments, rule="midpoint"):
    """``Y^H_t = M^H_t - (t/T) xi^H_T`` on ``[0, T]``."""
    H = check_hurst(H)
    inc = _check_driving(grid, increments)
    M = fundamental_martingale(H, grid, inc, rule)
    x = xi(H, T, M)
    sub, keep = grid.restrict(T)
    vals = M.values[:, keep] - (sub.points / T) * x[:, None]
    return PathEnsemble(sub, vals, dict(M.meta, spec=f"yh(H={H!r}, T={T!r})"))


def yh_representation(H, T, grid, increments, rule="midpoint"):
    """``sqrt(2 - 2H) int_0^t s^(1 - 2H) dN^(H-1/2, T)_s`` on ``[0, T]``.

    The bridge increments are integrated with midpoint weights
    ``m^(1-2H)``; on the first cell the weight is the moment ratio
    matching the ``s^(H-1/2)`` density of ``dN``.
    """
    H = check_hurst(H)
    inc = _check_driving(grid, increments)
    alpha = H - 0.5
    N = nalpha_path(alpha, grid, inc, rule)
    B = bridge(N, BridgeSpec(alpha, T))
    t = B.grid.points
    mid = 0.5 * (t[:-1] + t[1:])
    w = mid ** (1 - 2 * H)
    w[0] = t[1] ** (1 - 2 * H) * (H + 0.5) / (1.5 - H)
    dB = np.diff(B.values, axis=1)
    meta = dict(N.meta, spec=f"yh_representation(H={H!r}, T={T!r})")
    return _cumulative(B.grid, np.sqrt(2 - 2 * H) * dB * w, meta)
