"""Bessel functions of the first kind and Jacobi-Anger coefficients.

Two evaluation routes are provided. :func:`bessel_j` is the production
route (``scipy.special.jv``); :func:`bessel_j_miller` and
:func:`bessel_j_series` are written here and serve as independent checks.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special


def default_kmax(u) -> int:
    """Truncation order for Jacobi-Anger sums: max(20, ceil(|u|) + 20)."""
    return max(20, int(math.ceil(abs(u))) + 20)


def bessel_j(k, x):
    """J_k(x) for integer order ``k`` (negative orders allowed).

    Negative orders are mapped through J_{-k} = (-1)^k J_k, so the parity
    identity holds exactly.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("bessel_j: argument must be finite")
    k = int(k)
    if k < 0:
        val = special.jv(-k, x)
        if k % 2:
            val = -val
    else:
        val = special.jv(k, x)
    return float(val) if val.ndim == 0 else val


def bessel_j_miller(n_max, x) -> np.ndarray:
    """J_0(x) .. J_{n_max}(x) by Miller's backward recurrence.

    Normalised with J_0 + 2 * sum_{m>=1} J_{2m} = 1. Negative ``x`` is
    handled with J_k(-x) = (-1)^k J_k(x).
    """
    x = float(x)
    if not math.isfinite(x):
        raise ValueError("bessel_j_miller: argument must be finite")
    n_max = int(n_max)
    out = np.zeros(n_max + 1)
    if x == 0.0:
        out[0] = 1.0
        return out
    sign_flip = x < 0
    ax = abs(x)
    top = max(n_max, int(ax)) + 20 + int(math.sqrt(40.0 * max(n_max, ax, 1.0)))
    top += top % 2
    j_next, j_cur = 0.0, 1e-300
    vals = np.zeros(top + 1)
    vals[top] = j_cur
    for k in range(top, 0, -1):
        j_prev = 2.0 * k / ax * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        vals[k - 1] = j_cur
        if abs(j_cur) > 1e250:
            vals[k - 1:] *= 1e-250
            j_next *= 1e-250
            j_cur *= 1e-250
    norm = vals[0] + 2.0 * vals[2::2].sum()
    out[:] = vals[: n_max + 1] / norm
    if sign_flip:
        out[1::2] *= -1.0
    return out


def bessel_j_series(k, x, terms=None) -> float:
    """Ascending power series for J_k(x); accurate for |x| up to ~10."""
    k = int(k)
    x = float(x)
    n = abs(k)
    half = 0.5 * x
    if terms is None:
        terms = 40 + int(2 * abs(x))
    # term_m = (-1)^m (x/2)^(2m+n) / (m! (m+n)!)
    term = half ** n / math.factorial(n)
    total = term
    h2 = half * half
    for m in range(1, terms):
        term *= -h2 / (m * (m + n))
        total += term
        if abs(term) < 1e-18 * max(abs(total), 1e-300):
            break
    if k < 0 and n % 2:
        total = -total
    return total


def jacobi_anger_coeffs(u, k_max=None) -> np.ndarray:
    """Coefficients J_k(u) for k = -k_max .. k_max (length 2*k_max + 1).

    They satisfy exp(i u sin(w t)) = sum_k J_k(u) exp(i k w t).
    """
    if k_max is None:
        k_max = default_kmax(u)
    if k_max < 0:
        raise ValueError("k_max must be non-negative")
    orders = np.arange(-k_max, k_max + 1)
    pos = special.jv(np.arange(0, k_max + 1), float(u))
    neg = pos[:0:-1] * np.where(orders[:k_max] % 2, -1.0, 1.0)
    return np.concatenate([neg, pos])


def jacobi_anger_orders(k_max) -> np.ndarray:
    return np.arange(-k_max, k_max + 1)
