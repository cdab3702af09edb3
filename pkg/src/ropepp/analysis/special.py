"""Sine and cosine integrals.

    Si(x) = int_0^x sin(u)/u du
    Ci(x) = gamma + ln x + int_0^x (cos(u) - 1)/u du

Three regimes:

* ``x <= 8``: power series (cancellation costs ~3 digits at x = 8),
* ``8 < x < 64``: continued fraction for E1(ix) (modified Lentz),
* ``x >= 64``: asymptotic auxiliary functions f, g truncated at their
  smallest term, which is below 1e-20 there.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["sine_integral", "cosine_integral", "sici"]

EULER_GAMMA = 0.57721566490153286060651209008240243
_SERIES_MAX = 8.0
_ASYMPTOTIC_MIN = 64.0
_EPS = 1e-16
_MAX_ITER = 500


def _series(x: float):
    # Si: sum (-1)^k x^(2k+1) / ((2k+1) (2k+1)!)
    # Ci: gamma + ln x + sum_{k>=1} (-1)^k x^(2k) / (2k (2k)!)
    x2 = x * x
    term = x  # (-1)^k x^(2k+1)/(2k+1)!
    si = x
    k = 0
    while True:
        k += 1
        term *= -x2 / ((2 * k) * (2 * k + 1))
        add = term / (2 * k + 1)
        si += add
        if abs(add) < _EPS * abs(si):
            break
    term = 1.0  # (-1)^k x^(2k)/(2k)!
    ci_sum = 0.0
    k = 0
    while True:
        k += 1
        term *= -x2 / ((2 * k - 1) * (2 * k))
        add = term / (2 * k)
        ci_sum += add
        if abs(add) < _EPS * max(abs(ci_sum), 1e-300) or k > _MAX_ITER:
            break
    return si, EULER_GAMMA + math.log(x) + ci_sum


def _continued_fraction(x: float):
    # E1(ix) = -Ci(x) + i (Si(x) - pi/2), evaluated by Lentz's method.
    tiny = 1e-300
    b = complex(1.0, x)
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(2, _MAX_ITER):
        a = -float((i - 1) * (i - 1))
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if abs(delta.real - 1.0) + abs(delta.imag) < _EPS:
            break
    else:  # pragma: no cover
        raise ArithmeticError(f"continued fraction did not converge at x={x}")
    h *= complex(math.cos(x), -math.sin(x))
    return math.pi / 2 + h.imag, -h.real


def _asymptotic(x: float):
    # f(x) ~ 1/x sum (-1)^k (2k)!/x^2k,  g(x) ~ 1/x^2 sum (-1)^k (2k+1)!/x^2k
    inv2 = 1.0 / (x * x)
    f = g = 0.0
    tf = 1.0
    tg = 1.0
    k = 0
    while True:
        f += tf
        g += tg
        k += 1
        nf = -tf * (2 * k - 1) * (2 * k) * inv2
        ng = -tg * (2 * k) * (2 * k + 1) * inv2
        if abs(nf) >= abs(tf) or abs(nf) < _EPS * abs(f):
            break
        tf, tg = nf, ng
    f /= x
    g *= inv2
    s, c = math.sin(x), math.cos(x)
    return math.pi / 2 - f * c - g * s, f * s - g * c


def _sici_scalar(x: float):
    if x <= _SERIES_MAX:
        return _series(x)
    if x < _ASYMPTOTIC_MIN:
        return _continued_fraction(x)
    return _asymptotic(x)


def sici(x):
    """Return ``(Si(x), Ci(x))`` for ``x > 0`` (scalar or array)."""
    arr = np.asarray(x, dtype=np.float64)
    if np.any(~(arr > 0)) or np.any(~np.isfinite(arr)):
        raise ValueError("sici requires finite x > 0 (Ci has a log singularity at 0)")
    flat = [_sici_scalar(float(v)) for v in arr.ravel()]
    si = np.array([p[0] for p in flat]).reshape(arr.shape)
    ci = np.array([p[1] for p in flat]).reshape(arr.shape)
    if arr.ndim == 0:
        return float(si), float(ci)
    return si, ci


def sine_integral(x):
    """Si(x); odd, defined for every finite x with Si(0) = 0."""
    arr = np.asarray(x, dtype=np.float64)
    if np.any(~np.isfinite(arr)):
        raise ValueError("sine_integral requires finite x")
    out = np.zeros(arr.shape)
    flat_in = arr.ravel()
    flat_out = out.ravel()
    for i, v in enumerate(flat_in):
        if v != 0.0:
            flat_out[i] = math.copysign(_sici_scalar(abs(float(v)))[0], v)
    out = flat_out.reshape(arr.shape)
    return float(out) if arr.ndim == 0 else out


def cosine_integral(x):
    """Ci(x) for ``x > 0``; raises ``ValueError`` at the singularity x <= 0."""
    arr = np.asarray(x, dtype=np.float64)
    if np.any(~(arr > 0)) or np.any(~np.isfinite(arr)):
        raise ValueError("cosine_integral is defined for finite x > 0 only")
    out = np.array([_sici_scalar(float(v))[1] for v in arr.ravel()]).reshape(arr.shape)
    return float(out) if arr.ndim == 0 else out
