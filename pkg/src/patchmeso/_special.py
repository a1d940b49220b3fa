"""The functions ``phi_q(x) = sum_i x^i / (i+q)!`` and their evaluation regimes.

``phi_q(x) = (e^x - sum_{p<q} x^p/p!) / x^q`` so ``lam^-q (mu - partial sum)``
equals ``dt^q phi_q(lam dt)`` and ``1F1(1; q+1; x) = q! phi_q(x)``.
"""
from __future__ import annotations

import math

import numpy as np

# Below this x the exponential is negligible next to the polynomial part and
# the rearranged closed form is well conditioned; between -30 and -1 the
# Kummer-transformed series has positive terms only.
ASYMPTOTIC_X = -30.0
SERIES_X = -1.0
_TINY = 1e-17


def _series(q: int, x: float) -> float:
    term = 1.0 / math.factorial(q)
    total = term
    i = 0
    while True:
        i += 1
        term *= x / (q + i)
        total += term
        if abs(term) <= _TINY * abs(total):
            return total


def _kummer(q: int, x: float) -> float:
    # 1F1(1; q+1; x) = e^x 1F1(q; q+1; -x), whose terms are all positive for x < 0
    y = -x
    term = 1.0
    total = 1.0
    i = 0
    while True:
        i += 1
        term *= y / i
        piece = term * q / (q + i)
        total += piece
        if piece <= _TINY * total:
            break
    return math.exp(x) * total / math.factorial(q)


def _rearranged(q: int, x: float) -> float:
    # (e^x - sum_{p<q} x^p/p!) / x^q, summed from the largest term down
    parts = [math.exp(x) / x**q] if x > -745 else []
    parts += [-(x ** (p - q)) / math.factorial(p) for p in range(q - 1, -1, -1)]
    return math.fsum(parts)


def phi(q: int, x: float) -> float:
    if q < 0:
        raise ValueError("q must be nonnegative")
    if q == 0:
        return math.exp(x)
    if x >= SERIES_X:
        return _series(q, x)
    if x >= ASYMPTOTIC_X:
        return _kummer(q, x)
    return _rearranged(q, x)


def phi_array(q: int, xs) -> np.ndarray:
    return np.array([phi(q, float(x)) for x in np.ravel(xs)]).reshape(np.shape(xs))
