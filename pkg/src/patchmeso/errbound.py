"""Upper bounds on the error of mesoscale coupling.

Bounds are reported in units of the forcing-derivative sup ``fbar^Q`` over
one mesoscale step. The mode sum is taken before the absolute value: the edge
response kernel ``sum_k v_kj z_k,e s^Q phi_Q(lam_k s)`` is nonnegative for the
diffusive patch, so pulling ``|f^Q| <= fbar^Q`` through the integral gives

    |R_j| <= fbar^Q dt^{Q+1}/(Q+1)! |sum_k v_kj (z_k,-n + z_k,n) 1F1(1; Q+2; lam_k dt)|.

``bound_kernel_nonnegative`` checks the positivity assumption for a given
eigensystem.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass

import numpy as np

from ._special import phi
from .errors import DegenerateSpectrumError
from .geometry import PatchGeometry
from .spectral import EigenSystem, analytic_eigensystem

__all__ = [
    "BoundReport",
    "hyp1f1_1",
    "remainder_bound",
    "remainder_bound_approx",
    "macro_error_bound",
    "bound_report",
    "bound_kernel_nonnegative",
    "bound_sweep",
    "write_sweep_csv",
    "R_FLOOR_EXP",
    "E_FLOOR",
]

log = logging.getLogger(__name__)

# R_jmax values below 10**(-R_FLOOR_EXP - Q) and E_max values below E_FLOOR sit
# in the numerical floor of the mode sums.
R_FLOOR_EXP = 13
E_FLOOR = 1e-11


def hyp1f1_1(Q: int, x: float) -> float:
    """``1F1(1; Q+2; x)`` for ``x <= 0``.

    Equal to ``(Q+1)! phi_{Q+1}(x)``; the series is summed directly near zero,
    through Kummer's transformation (positive terms) for moderately negative
    ``x`` and from the exact rearrangement
    ``(Q+1)! [e^x / x^{Q+1} - sum_p x^{p-Q-1}/p!]`` below ``x = -30``.
    """
    if int(Q) != Q or Q < 1:
        raise ValueError("Q must be an integer >= 1")
    return math.factorial(Q + 1) * phi(Q + 1, float(x))


def _F(es, delta_t, Q):
    return np.array([hyp1f1_1(Q, lam * delta_t) for lam in es.lam])


def remainder_bound(es: EigenSystem, delta_t: float, Q: int) -> np.ndarray:
    """``R_jmax`` for ``j = -n..n``; edges from the action-region sum."""
    es.require_complete()
    n, a = es.n, es.a
    pref = delta_t ** (Q + 1) / math.factorial(Q + 1)
    zsum = es.Z[:, 0] + es.Z[:, -1]
    weights = zsum * _F(es, delta_t, Q)
    R = np.zeros(2 * n + 1)
    R[1:-1] = pref * np.abs(es.V[:, 1:-1].T @ weights)
    j = np.arange(-n, n + 1)
    right = (j >= n - 2 * a) & (j <= n - 1)
    left = (j <= -(n - 2 * a)) & (j >= -(n - 1))
    R[-1] = float(np.sum(R[right]))
    R[0] = float(np.sum(R[left]))
    return R


def bound_kernel_nonnegative(es: EigenSystem, delta_t: float, Q: int, samples: int = 64,
                             tol: float = 1e-13) -> bool:
    """Whether ``sum_k v_kj z_k,e s^Q phi_Q(lam_k s)`` stays ``>= -tol`` on ``(0, dt]``.

    Checked per edge on a grid of ``s``; this is the condition under which the
    summed-then-absolute bound is rigorous.
    """
    for s in np.linspace(delta_t / samples, delta_t, samples):
        kern = np.array([s**Q * phi(Q, lam * s) for lam in es.lam])
        for e in (0, -1):
            resp = es.V[:, 1:-1].T @ (es.Z[:, e] * kern)
            if np.min(resp) < -tol * max(1.0, float(np.max(np.abs(resp)))):
                return False
    return True


def remainder_bound_approx(n: int, j, delta_t: float, Q: int):
    """Closed-form fit ``(2 dt)^{Q+1} 10^{-Q - (1 + 0.025 Q/dt)(n-1-j)}``."""
    j = np.asarray(j, dtype=float)
    return (2 * delta_t) ** (Q + 1) * 10.0 ** (-Q - (1 + 0.025 * Q / delta_t) * (n - 1 - j))


def macro_error_bound(es: EigenSystem, delta_t: float, Q: int, a: int | None = None) -> float:
    """``E_max``: bound on the core-summed error, even modes only."""
    es.require_complete()
    n = es.n
    a = es.a if a is None else a
    pref = delta_t ** (Q + 1) / math.factorial(Q + 1)
    even = es.k % 2 == 0
    core = es.V[even][:, n - a: n + a + 1].sum(axis=1)
    total = np.sum(core * es.Z[even, -1] * _F(es, delta_t, Q)[even])
    return float(pref * abs(total))


@dataclass(frozen=True)
class BoundReport:
    n: int
    a: int
    cos_ell: float
    delta_t: float
    Q: int
    R_jmax: np.ndarray
    E_max: float

    def __post_init__(self):
        if np.any(self.R_jmax < 0) or self.E_max < 0:
            raise ValueError("bounds must be nonnegative")


def bound_report(es: EigenSystem, delta_t: float, Q: int) -> BoundReport:
    return BoundReport(es.n, es.a, es.cos_ell, delta_t, Q,
                       remainder_bound(es, delta_t, Q), macro_error_bound(es, delta_t, Q))


def bound_sweep(ns, as_, delta_ts, Qs, cos_ells, skipped=None):
    """All bound rows for the Cartesian product of the ranges.

    ``as_`` may be a callable ``n -> iterable of a``. Returns ``(r_rows,
    e_rows)`` sorted by their parameter columns. Degenerate or invalid
    combinations are logged and, if ``skipped`` is a list, appended to it.
    """
    r_rows, e_rows = [], []
    for n in ns:
        for a in (as_(n) if callable(as_) else as_):
            if not 0 <= a < n:
                continue
            for c in cos_ells:
                try:
                    es = analytic_eigensystem(PatchGeometry(n, a, 2 * n + 1), c)
                except DegenerateSpectrumError as exc:
                    log.warning("skipping n=%d a=%d cos_ell=%g: %s", n, a, c, exc)
                    if skipped is not None:
                        skipped.append((n, a, c, str(exc)))
                    continue
                for dt in delta_ts:
                    for Q in Qs:
                        rep = bound_report(es, dt, Q)
                        for j in range(-n, n + 1):
                            r_rows.append((n, a, n - a, c, dt, Q, j, float(rep.R_jmax[j + n])))
                        e_rows.append((n, a, n - a, c, dt, Q, rep.E_max))
    r_rows.sort(key=lambda r: r[:7])
    e_rows.sort(key=lambda r: r[:6])
    return r_rows, e_rows


R_HEADER = ["n", "a", "n_minus_a", "cos_ell", "delta_t", "Q", "j", "R_jmax"]
E_HEADER = ["n", "a", "n_minus_a", "cos_ell", "delta_t", "Q", "E_max"]


def write_sweep_csv(rows, header, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in row])
