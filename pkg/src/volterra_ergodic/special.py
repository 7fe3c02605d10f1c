"""Gauss hypergeometric function on the negative real axis and the fBm constant.

Only arguments ``x <= 0`` are supported; that is the whole range needed by
the Molchan-Golosov kernel, where ``x = 1 - t/s`` with ``0 < s <= t``.
"""
import math

import numpy as np
from scipy.special import rgamma

from .errors import EvaluationError

MAX_TERMS = 10_000
TAIL_RTOL = 1e-14
# Beyond this value of the Pfaff variable the series is re-expanded around 1.
_SWITCH = 0.5
# Connection coefficients lose about -log10(distance) digits near integer c-a-b;
# inside this distance the result is interpolated in c-a-b from Chebyshev nodes.
_INTEGER_GUARD = 0.05
_CHEB_RADIUS = 0.25
_CHEB_NODES = 24


def _is_nonpos_int(v):
    return v <= 0 and float(v).is_integer()


def _rgamma(z):
    return float(rgamma(z))


def _series(a, b, c, w, max_terms, rtol):
    """Sum the hypergeometric series at points ``w`` in ``[0, 1)``.

    Stops per element once the geometric tail bound is below ``rtol`` of
    the partial sum.  Returns ``(values, unconverged_mask)``.
    """
    wf = np.array(w, dtype=float).ravel()
    out = np.ones_like(wf)
    idx = np.arange(wf.size)
    ww = wf
    term = np.ones_like(wf)
    total = np.ones_like(wf)
    n_min = int(math.ceil(max(abs(a), abs(b), abs(c)))) + 1
    for n in range(max_terms):
        if idx.size == 0:
            break
        coef = (a + n) * (b + n) / ((c + n) * (n + 1.0))
        term *= coef * ww
        total += term
        if coef == 0.0:  # terminating series
            out[idx] = total
            idx = idx[:0]
            break
        # convergence is checked every few terms; compacting the active set
        # only when it has shrunk keeps the inner loop on dense arrays
        if n + 1 < n_min or n % 4:
            continue
        rho = np.maximum(abs(coef) * ww, ww)
        with np.errstate(divide="ignore"):
            tail = np.abs(term) * rho / (1.0 - rho)
        done = (rho < 1.0) & (tail <= rtol * np.abs(total))
        if done.all():
            out[idx] = total
            idx = idx[:0]
            break
        if done.mean() > 0.5:
            out[idx[done]] = total[done]
            keep = ~done
            idx, ww, term, total = idx[keep], ww[keep], term[keep], total[keep]
    bad = np.zeros(wf.size, dtype=bool)
    if idx.size:
        out[idx] = total
        bad[idx] = True
    return out.reshape(np.shape(w)), bad.reshape(np.shape(w))


def _polynomial(a, b, c, x, max_terms):
    """2F1(a, b; c; x) for a non-positive integer ``a``, summed term by term."""
    n = int(-a)
    if n > max_terms:
        return np.zeros_like(x), np.ones(x.shape, dtype=bool)
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(n):
        term = term * ((a + k) * (b + k) / ((c + k) * (k + 1))) * x
        total = total + term
    return total, np.zeros(x.shape, dtype=bool)


def _connection(A, C, CB, d, v, max_terms, rtol):
    """2F1(A, C-CB; C; 1-v) with ``d = C-A-B`` from the two series around ``v = 0``.

    ``CB = C-B`` is passed in rather than recomputed: when it is tiny the
    result is very sensitive to it.
    """
    B = C - CB
    g = math.gamma(C)
    k1 = g * math.gamma(d) * _rgamma(C - A) * _rgamma(CB)
    k2 = g * math.gamma(-d) * _rgamma(A) * _rgamma(B)
    val = np.zeros_like(v)
    bad = np.zeros(v.shape, dtype=bool)
    if k1 != 0.0:
        s1, b1 = _series(A, B, 1.0 - d, v, max_terms, rtol)
        val += k1 * s1
        bad |= b1
    if k2 != 0.0:
        s2, b2 = _series(C - A, CB, 1.0 + d, v, max_terms, rtol)
        val += k2 * v**d * s2
        bad |= b2
    return val, bad


def gauss_2f1(a, b, c, x, *, max_terms=MAX_TERMS, rtol=TAIL_RTOL):
    """Evaluate 2F1(a, b; c; x) for real parameters and ``x <= 0``.

    The Pfaff transformation ``2F1(a,b;c;x) = (1-x)^(-a) 2F1(a, c-b; c; w)``
    with ``w = x/(x-1)`` maps the argument into ``[0, 1)``.  The power
    series in ``w`` is summed directly for ``w <= 0.5``; closer to 1 the
    function is continued with the standard ``1 - w`` connection formula.
    Where ``b - a`` is close to an integer the connection coefficients
    cancel, so the function is interpolated from Chebyshev nodes in ``b - a``
    around the integer, moving ``a`` or ``b`` and holding the other fixed.

    ``x`` may be a scalar or an array; the result has the same shape.

    Raises
    ------
    ValueError
        If ``c`` is a non-positive integer or some ``x > 0``.
    EvaluationError
        If a series does not converge within ``max_terms`` terms.
    """
    a, b, c = float(a), float(b), float(c)
    if _is_nonpos_int(c):
        raise ValueError(f"c={c} is a non-positive integer")
    xa = np.asarray(x, dtype=float)
    scalar = xa.ndim == 0
    xa = np.atleast_1d(xa)
    if not np.all(np.isfinite(xa)) or np.any(xa > 0):
        raise ValueError("gauss_2f1 supports finite x <= 0 only")
    if a == 0.0 or b == 0.0:
        out = np.ones_like(xa)
        return float(out[0]) if scalar else out
    if _is_nonpos_int(b) and not _is_nonpos_int(a):
        a, b = b, a

    w = xa / (xa - 1.0)
    pref = (1.0 - xa) ** (-a)
    A, B, C = a, c - b, c
    out = np.empty_like(xa)
    bad = np.zeros(xa.shape, dtype=bool)

    d = b - a  # = C - A - B
    use_connection = not _is_nonpos_int(A)
    near = w > _SWITCH
    far = ~near
    if not use_connection:
        # terminating series: summed in x, the w form cancels in (1-x)(1-w)
        out[near], bad[near] = _polynomial(a, b, c, xa[near], max_terms)
        near[:] = False

    if np.any(far):
        val, b1 = _series(A, B, C, w[far], max_terms, rtol)
        out[far] = val * pref[far]
        bad[far] = b1
    if np.any(near):
        xn = xa[near]
        v = 1.0 / (1.0 - xn)  # = 1 - w without cancellation
        m = round(d)
        if abs(d - m) > _INTEGER_GUARD:
            val, b1 = _connection(A, C, b, d, v, max_terms, rtol)
            val = val * pref[near]
        else:
            # The function is entire in a and b; the connection terms are not.
            # Vary the parameter whose pair of 1/Gamma factors does not hold the
            # smallest one, so a nearly vanishing coefficient stays exact.
            vary_a = (min(abs(_rgamma(b)), abs(_rgamma(c - b)))
                      < min(abs(_rgamma(a)), abs(_rgamma(c - a))))
            k = np.arange(_CHEB_NODES)
            theta = (2 * k + 1) * np.pi / (2 * _CHEB_NODES)
            nodes = m + _CHEB_RADIUS * np.cos(theta)
            vals = np.empty((_CHEB_NODES, v.size))
            b1 = np.zeros(v.size, dtype=bool)
            for i, dk in enumerate(nodes):
                dk = float(dk)
                ak, bk = (b - dk, b) if vary_a else (a, a + dk)
                vk, bb = _connection(ak, C, bk, dk, v, max_terms, rtol)
                vals[i] = vk * (1.0 - xn) ** (-ak)
                b1 |= bb
            bw = (-1.0) ** k * np.sin(theta) / (d - nodes)
            val = bw @ vals / bw.sum()
        out[near] = val
        bad[near] |= b1

    if np.any(bad):
        xb = float(xa[bad][0])
        raise EvaluationError(
            f"2F1({a}, {b}; {c}; {xb}) did not converge in {max_terms} terms",
            a=a, b=b, c=c, x=xb,
        )
    return float(out[0]) if scalar else out


def fbm_c(hurst):
    """Normalising constant of the fBm Volterra kernel.

    ``c(H) = sqrt(2H Gamma(3/2 - H) / (Gamma(H + 1/2) Gamma(2 - 2H)))``
    """
    H = float(hurst)
    if not 0.0 < H < 1.0:
        raise ValueError(f"Hurst index must lie in (0, 1), got {H}")
    return math.sqrt(
        2.0 * H * math.gamma(1.5 - H) / (math.gamma(H + 0.5) * math.gamma(2.0 - 2.0 * H))
    )
