"""Covariance functions of self-similar Volterra processes.

``R(s, t) = int_0^min(s,t) z(s, u) z(t, u) du`` is available in closed form
for fBm and the power-Markov family; for other kernels it is computed by
product integration.  The module also holds the deterministic oracle for the
covariance of the transformed process ``Z^alpha(X)``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import NotPositiveDefiniteError
from .kernels import Fbm, PowerMarkov, check_alpha, check_hurst, reduced_kernel
from .quadrature import GRADING_DEPTH, GRADING_RATIO, integrate

JITTER_SCALE = 1e-12


def fbm_cov(H, s, t):
    """``(s^2H + t^2H - |s - t|^2H) / 2``, computed without cancellation
    when one argument is much smaller than the other."""
    H = check_hurst(H)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise ValueError("fbm_cov requires s, t >= 0")
    lo = np.minimum(s, t)
    hi = np.maximum(s, t)
    with np.errstate(divide="ignore", invalid="ignore"):
        # hi^2H - (hi - lo)^2H = -hi^2H expm1(2H log1p(-lo/hi))
        gap = -hi ** (2 * H) * np.expm1(2 * H * np.log1p(-lo / hi))
    gap = np.where(hi > 0, gap, 0.0)
    out = 0.5 * (lo ** (2 * H) + gap)
    return out[()] if out.ndim == 0 else out


def nalpha_cov(alpha, s, t):
    """Covariance ``min(s, t)^(2 alpha + 1) / (2 alpha + 1)`` of
    ``N^alpha_t = int_0^t u^alpha dW_u``."""
    alpha = check_alpha(alpha)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise ValueError("nalpha_cov requires s, t >= 0")
    out = np.minimum(s, t) ** (2 * alpha + 1) / (2 * alpha + 1)
    return out[()] if out.ndim == 0 else out


def power_markov_cov(spec, s, t):
    """``c^2 (st)^(beta - alpha - 1/2) min(s,t)^(2 alpha + 1) / (2 alpha + 1)``."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    a, b = spec.alpha, spec.beta
    lo = np.minimum(s, t)
    hi = np.maximum(s, t)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = spec.c**2 * hi ** (b - a - 0.5) * lo ** (b + a + 0.5) / (2 * a + 1)
    out = np.where(lo > 0, out, 0.0)
    return out[()] if out.ndim == 0 else out


def _kernel_cov_batch(spec, s, t, tol):
    # 0 < s <= t elementwise, 1-D arrays
    d = spec.diag_exponent
    e = spec.origin_exponent
    out = np.empty_like(s)
    eq = s == t
    if np.any(eq):
        se = s[eq]

        def g_eq(u):
            r = reduced_kernel(spec, se[:, None], u)
            return r * r * u ** (-2 * e)

        out[eq] = integrate(g_eq, 0.0, se, left_power=2 * e, right_power=2 * d, tol=tol)
    ne = ~eq
    if np.any(ne):
        sn, tn = s[ne], t[ne]

        def g_ne(u):
            z_t = (tn[:, None] - u) ** d * reduced_kernel(spec, tn[:, None], u)
            return reduced_kernel(spec, sn[:, None], u) * z_t * u ** (-2 * e)

        out[ne] = integrate(g_ne, 0.0, sn, left_power=2 * e, right_power=d, tol=tol)
    return out


def kernel_cov_quad(spec, s, t, tol=1e-10):
    """``int_0^min(s,t) z(s,u) z(t,u) du`` by product integration."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise ValueError("covariance requires s, t >= 0")
    s, t = np.broadcast_arrays(s, t)
    lo = np.minimum(s, t).ravel()
    hi = np.maximum(s, t).ravel()
    out = np.zeros(lo.shape)
    pos = lo > 0
    if np.any(pos):
        out[pos] = _kernel_cov_batch(spec, lo[pos], hi[pos], tol)
    out = out.reshape(s.shape)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class CovarianceOracle:
    """Evaluator of ``R(s, t)`` for a kernel.

    ``mode='analytic'`` uses the closed form where one exists (fBm,
    power-Markov) and falls back to quadrature otherwise;
    ``mode='quadrature'`` always integrates the kernel product.
    """

    spec: object
    mode: str = "analytic"
    quad_tol: float = 1e-10

    def __post_init__(self):
        if self.mode not in ("analytic", "quadrature"):
            raise ValueError(f"unknown covariance mode {self.mode!r}")

    @property
    def beta(self):
        return self.spec.beta

    @property
    def analytic(self):
        return self.mode == "analytic" and isinstance(self.spec, (Fbm, PowerMarkov))

    def __call__(self, s, t):
        if self.analytic:
            if isinstance(self.spec, Fbm):
                return fbm_cov(self.spec.hurst, s, t)
            return power_markov_cov(self.spec, s, t)
        return kernel_cov_quad(self.spec, s, t, tol=self.quad_tol)

    def variance_at_one(self):
        return float(self(1.0, 1.0))


def kernel_cov(oracle, s, t):
    """``R(s, t)`` from the kernel integral, regardless of the oracle mode."""
    return kernel_cov_quad(oracle.spec, s, t, tol=oracle.quad_tol)


@dataclass
class CovMatrix:
    points: np.ndarray
    entries: np.ndarray
    min_eigenvalue: float
    jitter: float = 0.0

    @property
    def positive_definite(self):
        return self.min_eigenvalue > 0

    def cholesky(self):
        """Lower Cholesky factor of the block at positive times.

        Raises NotPositiveDefiniteError if that block is not numerically PD.
        """
        pos = self.points > 0
        block = self.entries[np.ix_(pos, pos)]
        try:
            return np.linalg.cholesky(block)
        except np.linalg.LinAlgError:
            raise NotPositiveDefiniteError(
                f"covariance matrix is not positive definite "
                f"(smallest eigenvalue {self.min_eigenvalue:.3e})",
                min_eigenvalue=self.min_eigenvalue,
            ) from None


def cov_matrix(oracle, grid, jitter=False):
    """Covariance matrix of the process on ``grid`` (TimeGrid or array).

    Rows for ``t = 0`` are identically zero; positive definiteness is judged
    on the block of positive times.  With ``jitter=True`` the diagonal of
    that block is raised by ``1e-12 * max diagonal``.
    """
    pts = np.asarray(getattr(grid, "points", grid), dtype=float)
    if pts.ndim != 1 or np.any(np.diff(pts) <= 0) or np.any(pts < 0):
        raise ValueError("grid must be strictly increasing and non-negative")
    i, j = np.triu_indices(pts.size)
    vals = np.asarray(oracle(pts[i], pts[j]), dtype=float)
    C = np.zeros((pts.size, pts.size))
    C[i, j] = vals
    C[j, i] = vals
    pos = pts > 0
    amount = 0.0
    if jitter and np.any(pos):
        amount = JITTER_SCALE * float(np.max(np.diag(C)))
        C[pos, pos] += amount
    block = C[np.ix_(pos, pos)]
    lam = float(np.linalg.eigvalsh(block)[0]) if block.size else float("inf")
    return CovMatrix(pts, C, lam, amount)


def selfsim_bound_check(oracle, samples):
    """Largest value of ``|R(s,t)| - R(1,1) s^beta t^beta`` over ``samples``."""
    st = np.asarray(samples, dtype=float).reshape(-1, 2)
    if np.any(st <= 0):
        raise ValueError("bound check requires s, t > 0")
    s, t = st[:, 0], st[:, 1]
    b = oracle.beta
    r11 = oracle.variance_at_one()
    viol = np.abs(oracle(s, t)) - r11 * (s * t) ** b
    return float(np.max(viol))


def stationary_cov(oracle, lag):
    """Autocovariance ``e^(beta d) R(e^-d, 1)`` of the Lamperti transform."""
    d = np.abs(np.asarray(lag, dtype=float))
    out = np.exp(oracle.beta * d) * oracle(np.exp(-d), 1.0)
    return out[()] if np.ndim(out) == 0 else out


def _line_integral(oracle, a, b, p, tol):
    """``int_0^b u^p R(a, u) du`` elementwise, split at the kink ``u = a``.

    ``a`` and ``b`` broadcast; the result has their broadcast shape.
    """
    spec = oracle.spec
    h = spec.beta + 0.5 + spec.origin_exponent  # R(a, u) ~ u^h as u -> 0
    lead = p + h
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    first_end = np.minimum(a, b)

    def g0(u):
        return u ** (p - lead) * oracle(a[..., None], u)

    out = np.asarray(integrate(g0, 0.0, first_end, left_power=lead, tol=tol, atol=1e-300), dtype=float)
    beyond = b > a
    if np.any(beyond):
        ab, bb = a[beyond], b[beyond]

        def g1(u):
            return u**p * oracle(ab[:, None], u)

        # a short segment next to the kink only needs accuracy relative to the
        # whole integral
        atol = 1e-2 * tol * np.abs(out[beyond]) + 1e-300
        # grade toward u = a down to a fraction of a itself
        rel = float(np.min(ab / (bb - ab)))
        depth = GRADING_DEPTH + max(0, int(np.ceil(np.log(rel) / np.log(GRADING_RATIO))))
        out = out.copy()
        out[beyond] += integrate(g1, ab, bb, tol=tol, atol=atol, depth=depth)
    return out


def transform_cov_oracle(oracle, alpha, s, t, tol=None):
    """``Cov(Z^alpha_s(X), Z^alpha_t(X))`` expanded into integrals of ``R``.

    With ``g = beta - alpha - 1/2`` and ``p = alpha - beta - 1/2``:

        R(s,t) - k t^g I(s; t) - k s^g I(t; s)
               + k^2 (st)^g int_0^s v^p I(v; t) dv,
        I(a; b) = int_0^b u^p R(a, u) du,  k = 2 alpha + 1.

    Measure preservation asserts that the result equals ``R(s, t)``.
    """
    alpha = check_alpha(alpha)
    s, t = float(s), float(t)
    if s < 0 or t < 0:
        raise ValueError("transform_cov_oracle requires s, t >= 0")
    s, t = min(s, t), max(s, t)
    if s == 0.0:
        return 0.0
    tol = oracle.quad_tol if tol is None else tol
    inner_tol = tol / 4
    b = oracle.beta
    g = b - alpha - 0.5
    p = alpha - b - 0.5
    k = 2 * alpha + 1
    e = oracle.spec.origin_exponent

    i1 = float(_line_integral(oracle, s, t, p, inner_tol))
    i2 = float(_line_integral(oracle, t, s, p, inner_tol))

    # v^p I(v; t) ~ c1 v^(alpha + e) + c2 v^(2 alpha) near 0; the weaker term
    # is left to the mesh, graded until its innermost cell is negligible
    lead = min(alpha + e, 2 * alpha)
    weak = max(alpha + e, 2 * alpha) + 1.0
    depth = max(GRADING_DEPTH, int(np.ceil(14.0 / (weak * -np.log10(GRADING_RATIO)))))

    def outer(v):
        return v ** (p - lead) * _line_integral(oracle, v, t, p, inner_tol)

    J = float(integrate(outer, 0.0, s, left_power=lead, tol=inner_tol, atol=1e-300, depth=depth))
    r = float(oracle(s, t))
    return r - k * t**g * i1 - k * s**g * i2 + k * k * (s * t) ** g * J
