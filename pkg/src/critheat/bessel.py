"""Bessel functions J_nu for the orders a radial Fourier transform needs.

Only integer and half-integer orders occur (nu = (d-2)/2 with integer d).
Half-integer orders reduce to spherical Bessel functions: ascending series for
small argument, stable upward trigonometric recursion for large argument.
Integer orders use the ascending power series below the matching point and the
Hankel large-argument expansion above it; the two regimes agree to better than
1e-9 in the overlap window.
"""

from __future__ import annotations

import math

import numpy as np

_SERIES_TERMS = 80


def _spherical_series(n: int, x: np.ndarray) -> np.ndarray:
    """j_n(x) = x^n sum_k (-x^2/2)^k / (k! (2n+2k+1)!!), small-argument branch."""
    out = np.zeros_like(x)
    term = np.ones_like(x)
    dfact = 1.0
    for j in range(1, 2 * n + 2, 2):
        dfact *= j
    term /= dfact
    out += term
    xsq = x * x
    for k in range(1, _SERIES_TERMS):
        term = term * (-0.5 * xsq) / (k * (2 * n + 2 * k + 1))
        out += term
        if np.all(np.abs(term) <= 1e-18 * np.abs(out) + 1e-300):
            break
    return out * x**n


def _spherical_recurrence(n: int, x: np.ndarray) -> np.ndarray:
    """Upward recursion j_{k+1} = (2k+1)/x j_k - j_{k-1}; stable for x >~ n."""
    j0 = np.sin(x) / x
    if n == 0:
        return j0
    j1 = np.sin(x) / (x * x) - np.cos(x) / x
    if n == 1:
        return j1
    jm, jc = j0, j1
    for k in range(1, n):
        jm, jc = jc, (2 * k + 1) / x * jc - jm
    return jc


def _spherical_jn(n: int, x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    switch = max(6.0, 1.5 * n)
    small = x < switch
    if small.any():
        out[small] = _spherical_series(n, x[small])
    if (~small).any():
        out[~small] = _spherical_recurrence(n, x[~small])
    return out


def _integer_series(nu: int, x: np.ndarray) -> np.ndarray:
    half = 0.5 * x
    term = half**nu / math.factorial(nu)
    out = term.copy()
    xsq = half * half
    for k in range(1, _SERIES_TERMS):
        term = term * (-xsq) / (k * (k + nu))
        out += term
        if np.all(np.abs(term) <= 1e-18 * np.abs(out) + 1e-300):
            break
    return out


def _integer_asymptotic(nu: int, x: np.ndarray) -> np.ndarray:
    """Hankel expansion sqrt(2/(pi x)) [P cos w - Q sin w], w = x - nu pi/2 - pi/4."""
    mu = 4.0 * nu * nu
    inv8x = 1.0 / (8.0 * x)
    p = np.ones_like(x)
    q = np.zeros_like(x)
    term = np.ones_like(x)
    sign_cycle = (1.0, 1.0, -1.0, -1.0)  # signs of the k-th term in (P, Q) interleaved
    for k in range(1, 24):
        term = term * (mu - (2 * k - 1) ** 2) * inv8x / k
        if np.all(np.abs(term) < 1e-18):
            break
        s = sign_cycle[k % 4]
        if k % 2 == 1:
            q += s * term
        else:
            p += s * term
    w = x - nu * math.pi / 2.0 - math.pi / 4.0
    return np.sqrt(2.0 / (math.pi * x)) * (p * np.cos(w) - q * np.sin(w))


def _integer_jn(nu: int, x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    switch = 12.0 if nu <= 3 else 14.0
    small = x < switch
    if small.any():
        out[small] = _integer_series(nu, x[small])
    if (~small).any():
        out[~small] = _integer_asymptotic(nu, x[~small])
    return out


def bessel_j(nu: float, x) -> np.ndarray:
    """J_nu(x) for nu integer or half-integer, x >= 0, vectorized."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    if np.any(x < 0.0):
        raise ValueError("argument must be nonnegative")
    twice = round(2 * nu)
    if abs(2 * nu - twice) > 1e-12 or twice < 0:
        raise ValueError(f"order must be a nonnegative integer or half-integer, got {nu}")
    out = np.empty_like(x)
    pos = x > 0.0
    if twice % 2 == 0:
        n = twice // 2
        out[~pos] = 1.0 if n == 0 else 0.0
        if pos.any():
            out[pos] = _integer_jn(n, x[pos])
    else:
        n = (twice - 1) // 2
        out[~pos] = 0.0
        if pos.any():
            xp = x[pos]
            out[pos] = np.sqrt(2.0 * xp / math.pi) * _spherical_jn(n, xp)
    return out[0] if scalar else out
