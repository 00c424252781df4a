"""Polynomial helpers in increasing-power convention (coef[0] = B^0 term)."""

from __future__ import annotations

import numpy as np

__all__ = ["polymul", "polypow", "expand_seasonal", "diff_poly", "seasonal_sum_poly",
           "combined_lag_poly"]


def polymul(a, b) -> np.ndarray:
    return np.polynomial.polynomial.polymul(np.asarray(a, float), np.asarray(b, float))


def polypow(a, k: int) -> np.ndarray:
    out = np.array([1.0])
    for _ in range(k):
        out = polymul(out, a)
    return out


def expand_seasonal(poly, s: int) -> np.ndarray:
    """Substitute B -> B^s: coefficients spread onto multiples of s."""
    poly = np.asarray(poly, float)
    out = np.zeros((poly.size - 1) * s + 1)
    out[::s] = poly
    return out


def diff_poly(d: int, D: int, s: int) -> np.ndarray:
    """(1-B)^d (1-B^s)^D as increasing-order coefficients."""
    out = polypow([1.0, -1.0], d)
    if D:
        out = polymul(out, polypow(expand_seasonal([1.0, -1.0], s), D))
    return out


def seasonal_sum_poly(s: int) -> np.ndarray:
    """1 + B + ... + B^{s-1}."""
    return np.ones(s)


def combined_lag_poly(base, seasonal, s: int, sign: float) -> np.ndarray:
    """Coefficient list of the product of base(B) and seasonal(B^s).

    ``sign`` fixes the convention: -1 for AR (1 - c1 B - ...), +1 for MA
    (1 + t1 B + ...).  Input and output omit the leading 1.
    """
    a = np.concatenate([[1.0], sign * np.asarray(base, float).ravel()])
    b = np.concatenate([[1.0], sign * np.asarray(seasonal, float).ravel()])
    prod = polymul(a, expand_seasonal(b, s))
    return sign * prod[1:]
