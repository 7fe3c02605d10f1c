"""Self-similar Volterra kernels.

A kernel ``z(t, s)`` vanishes for ``s >= t`` and is homogeneous of degree
``beta - 1/2``; equivalently it factorises as

    z(t, s) = (t - s)^(beta - 1/2) * F(s / t),    0 < s < t.

Three families are provided:

* :class:`Fbm` -- the Molchan-Golosov kernel of fractional Brownian motion,
* :class:`PowerMarkov` -- ``c t^(beta - 1/2 - alpha) s^alpha``, the kernels of
  the Markov members of the class,
* :class:`CustomFactor` -- any user supplied factor ``F``.

For custom factors the linear independence / density of the sections
``z(t, .)`` cannot be verified from samples and is assumed.  The factor must
be finite on (0, 1); ``factor_exponent`` declares its power-law order at 0+
so that quadrature can treat the singularity exactly.
"""
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .quadrature import integrate
from .special import fbm_c, gauss_2f1

RESIDUAL_FLOOR = 1e-12


def check_hurst(value):
    H = float(value)
    if not 0.0 < H < 1.0:
        raise ValueError(f"Hurst index must lie in (0, 1), got {value}")
    return H


def check_alpha(value):
    a = float(value)
    if not a > -0.5:
        raise ValueError(f"alpha must exceed -1/2, got {value}")
    return a


def _check_positive(name, value):
    v = float(value)
    if not v > 0.0 or not np.isfinite(v):
        raise ValueError(f"{name} must be positive, got {value}")
    return v


class KernelSpec:
    """Base class of the kernel families.

    Subclasses define ``beta``, ``diag_exponent`` (order of the kernel's
    power singularity at ``s = t``), ``origin_exponent`` (order at ``s = 0``)
    and the two evaluators ``_reduced`` and ``factor``.
    """

    beta: float
    diag_exponent: float
    origin_exponent: float

    def factor(self, x):
        raise NotImplementedError

    def _reduced(self, t, s):
        """``z(t, s) / (t - s)^diag_exponent`` for ``0 < s < t``."""
        raise NotImplementedError

    def __call__(self, t, s):
        return kernel_eval(self, t, s)

    @property
    def label(self):
        return type(self).__name__


@dataclass(frozen=True)
class Fbm(KernelSpec):
    hurst: float

    def __post_init__(self):
        object.__setattr__(self, "hurst", check_hurst(self.hurst))

    @property
    def beta(self):
        return self.hurst

    @property
    def diag_exponent(self):
        return self.hurst - 0.5

    @property
    def origin_exponent(self):
        return -abs(self.hurst - 0.5)

    @property
    def c(self):
        return fbm_c(self.hurst)

    def factor(self, x):
        x = np.asarray(x, dtype=float)
        H = self.hurst
        return self.c * gauss_2f1(0.5 - H, H - 0.5, H + 0.5, 1.0 - 1.0 / x)

    def _reduced(self, t, s):
        H = self.hurst
        return self.c * gauss_2f1(0.5 - H, H - 0.5, H + 0.5, 1.0 - t / s)

    @property
    def label(self):
        return f"fbm(H={self.hurst!r})"


@dataclass(frozen=True)
class PowerMarkov(KernelSpec):
    """``z(t, s) = c t^(beta - 1/2 - alpha) s^alpha``."""

    alpha: float
    beta: float
    c: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", check_alpha(self.alpha))
        object.__setattr__(self, "beta", _check_positive("beta", self.beta))
        object.__setattr__(self, "c", _check_positive("c", self.c))

    diag_exponent = 0.0

    @property
    def origin_exponent(self):
        return self.alpha

    def factor(self, x):
        x = np.asarray(x, dtype=float)
        return self.c * x**self.alpha * (1.0 - x) ** (0.5 - self.beta)

    def _reduced(self, t, s):
        return self.c * t ** (self.beta - 0.5 - self.alpha) * s**self.alpha

    @property
    def label(self):
        return f"power_markov(alpha={self.alpha!r}, beta={self.beta!r}, c={self.c!r})"


@dataclass(frozen=True)
class CustomFactor(KernelSpec):
    """``z(t, s) = (t - s)^(beta - 1/2) factor(s / t)``.

    ``factor`` must be vectorised.  ``factor_exponent`` is the exponent ``e``
    with ``factor(x) ~ x^e`` as ``x -> 0+`` (0 for bounded factors).
    """

    beta: float
    fn: Callable = field(compare=False)
    factor_exponent: float = 0.0
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "beta", _check_positive("beta", self.beta))
        if not self.factor_exponent > -0.5:
            raise ValueError("factor_exponent must exceed -1/2 for a square-integrable kernel")

    @property
    def diag_exponent(self):
        return self.beta - 0.5

    @property
    def origin_exponent(self):
        return self.factor_exponent

    def factor(self, x):
        return np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)

    def _reduced(self, t, s):
        return self.factor(s / t)

    @property
    def label(self):
        return f"custom({self.name}, beta={self.beta!r})"


def kernel_eval(spec, t, s):
    """Evaluate ``z(t, s)``; zero wherever ``s >= t``.

    ``t`` and ``s`` broadcast against each other; both must be positive.
    """
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(t <= 0) or np.any(s <= 0):
        raise ValueError("kernel_eval requires t > 0 and s > 0")
    t, s = np.broadcast_arrays(t, s)
    out = np.zeros(t.shape)
    live = s < t
    if np.any(live):
        tl, sl = t[live], s[live]
        out[live] = (tl - sl) ** spec.diag_exponent * spec._reduced(tl, sl)
    return out[()] if out.ndim == 0 else out


def factor_eval(spec, x):
    """The factor ``F`` with ``z(t, s) = (t - s)^(beta - 1/2) F(s/t)``."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0) or np.any(x >= 1):
        raise ValueError("factor_eval requires 0 < x < 1")
    out = np.asarray(spec.factor(x), dtype=float)
    return out[()] if out.ndim == 0 else out


def reduced_kernel(spec, t, s):
    """``z(t, s) / (t - s)^d`` for ``0 < s < t`` (no masking)."""
    return spec._reduced(np.asarray(t, dtype=float), np.asarray(s, dtype=float))


def kernel_identity_sides(spec, alpha, s, t, tol=1e-12):
    """Both sides of the kernel identity

        t^(b-a-1/2) int_s^t u^(a-b-1/2) z(u, s) du
            = s^a int_s^t z(t, u) u^(-a-1) du

    (``a`` = alpha, ``b`` = beta), each by product integration.
    """
    alpha = check_alpha(alpha)
    s, t = float(s), float(t)
    if not 0.0 < s < t:
        raise ValueError("kernel identity requires 0 < s < t")
    beta = spec.beta
    d = spec.diag_exponent

    def lhs_g(u):
        return u ** (alpha - beta - 0.5) * reduced_kernel(spec, u, s)

    def rhs_g(u):
        return reduced_kernel(spec, t, u) * u ** (-alpha - 1.0)

    lhs = t ** (beta - alpha - 0.5) * integrate(lhs_g, s, t, left_power=d, tol=tol)
    rhs = s**alpha * integrate(rhs_g, s, t, right_power=d, tol=tol)
    return float(lhs), float(rhs)


def kernel_identity_residual(spec, alpha, s, t, tol=1e-12):
    """Relative mismatch of the two sides of the kernel identity."""
    lhs, rhs = kernel_identity_sides(spec, alpha, s, t, tol=tol)
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), RESIDUAL_FLOOR)


def unit_cell_average(spec, tol=1e-12):
    """``int_0^1 z(1, x) dx``, the exact average of ``z(h, .)`` over
    ``[0, h]`` divided by ``h^(beta - 1/2)``."""
    e, d = spec.origin_exponent, spec.diag_exponent

    def g(x):
        return reduced_kernel(spec, 1.0, x) * x ** (-e)

    return float(integrate(g, 0.0, 1.0, left_power=e, right_power=d, tol=tol))
