"""Coupling strength, nearest-neighbour forcing and forcing providers.

A provider supplies the edge forcing ``f(t) = (f_-n, f_n)`` of one patch and
its time derivatives. Providers with closed-form time dependence also supply
the convolution ``int_0^t f(t') e^{lam (t - t')} dt'`` exactly; the generic
callable provider falls back to adaptive quadrature.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from ._special import phi
from .errors import QuadratureError

__all__ = [
    "Q_MAX",
    "nn_cos_ell",
    "nn_forcing",
    "taylor_extrapolate",
    "CouplingSpec",
    "MesoSchedule",
    "ForcingProvider",
    "PolynomialForcing",
    "SinusoidalForcing",
    "ExponentialForcing",
    "CallableForcing",
    "HistoryForcing",
    "HeldForcing",
    "write_forcing_csv",
]

Q_MAX = 8
QUAD_RTOL = 1e-12


def nn_cos_ell(r: float, gamma: float) -> float:
    """``cos(ell) = 1 - r^2 gamma`` for nearest-neighbour interpolation."""
    if not 0.0 < r < 0.5:
        raise ValueError(f"ratio r={r} outside (0, 1/2)")
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma={gamma} outside [0, 1]")
    return 1.0 - r * r * gamma


def nn_forcing(r: float, gamma: float, a: int, U_prev, U_next):
    """Edge forcing ``(f_-n, f_n)`` from the two neighbouring macroscale values."""
    if not 0.0 < r < 0.5:
        raise ValueError(f"ratio r={r} outside (0, 1/2)")
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma={gamma} outside [0, 1]")
    s = 0.5 * (2 * a + 1) * r * gamma
    f_plus = s * ((r + 1) * U_next + (r - 1) * U_prev)
    f_minus = s * ((r - 1) * U_next + (r + 1) * U_prev)
    return f_minus, f_plus


def taylor_extrapolate(history, t: float):
    """Evaluate ``sum_q f^q t^q / q!`` from ``history[q] = (f^q_-n, f^q_n)``."""
    history = [np.asarray(h, dtype=float) for h in history]
    if not history:
        raise ValueError("at least the zeroth derivative is required")
    out = np.zeros(2)
    for q, fq in enumerate(history):
        if fq.shape != (2,):
            raise ValueError(f"derivative of order {q} must hold (f_minus, f_plus)")
        out = out + fq * t**q / math.factorial(q)
    return float(out[0]), float(out[1])


@dataclass(frozen=True)
class MesoSchedule:
    delta_t: float
    M: int
    Q: int = 1

    def __post_init__(self):
        if not self.delta_t > 0:
            raise ValueError("delta_t must be positive")
        if int(self.M) != self.M or self.M < 1:
            raise ValueError("M must be an integer >= 1")
        _check_Q(self.Q)

    def instants(self) -> np.ndarray:
        """Update instants ``m delta_t`` for ``m = 0..M``."""
        return self.delta_t * np.arange(self.M + 1)


def _check_Q(Q):
    if int(Q) != Q or not 1 <= Q <= Q_MAX:
        raise ValueError(f"Q={Q} must be an integer in 1..{Q_MAX}")


class ForcingProvider:
    """Edge forcing of one patch; subclasses override ``derivative``."""

    def value(self, t: float) -> np.ndarray:
        return self.derivative(t, 0)

    def derivative(self, t: float, q: int) -> np.ndarray:
        raise NotImplementedError

    def derivatives(self, t: float, Q: int) -> list[np.ndarray]:
        """``[f^0(t), ..., f^{Q-1}(t)]``."""
        _check_Q(Q)
        return [np.asarray(self.derivative(t, q), dtype=float) for q in range(Q)]

    def convolve(self, lam: np.ndarray, t: float, q: int = 0) -> np.ndarray:
        """``int_0^t f^q(t') e^{lam (t - t')} dt'``, shape ``(len(lam), 2)``."""
        lam = np.atleast_1d(np.asarray(lam, dtype=float))

        def g(s):
            return np.exp(lam * (t - s))[:, None] * self.derivative(s, q)[None, :]

        return _quad(g, 0.0, t)

    def sup_abs(self, q: int, t0: float, t1: float, samples: int = 2001) -> float:
        """Sampled ``max |f^q|`` on ``[t0, t1]`` over both edges."""
        ts = np.linspace(t0, t1, samples)
        return float(max(np.max(np.abs(self.derivative(s, q))) for s in ts))


def _quad(g, a, b):
    if b == a:
        return np.zeros_like(g(a))
    val, err = integrate.quad_vec(g, a, b, epsabs=0.0, epsrel=QUAD_RTOL, limit=2000)
    scale = max(np.max(np.abs(val)), 1e-300)
    if err > 10 * QUAD_RTOL * scale and err > 1e-15:
        raise QuadratureError(err / scale, QUAD_RTOL)
    return val


class PolynomialForcing(ForcingProvider):
    """``f_-n(t) = sum_i minus[i] t^i`` and likewise for ``f_n``."""

    def __init__(self, minus: Sequence[float], plus: Sequence[float]):
        m = len(minus)
        p = len(plus)
        width = max(m, p, 1)
        self.coef = np.zeros((width, 2))
        self.coef[:m, 0] = minus
        self.coef[:p, 1] = plus

    @property
    def degree(self) -> int:
        return len(self.coef) - 1

    def derivative(self, t, q):
        out = np.zeros(2)
        for i in range(q, len(self.coef)):
            out += self.coef[i] * (math.factorial(i) // math.factorial(i - q)) * t ** (i - q)
        return out

    def convolve(self, lam, t, q=0):
        # int_0^t s^i e^{lam (t-s)} ds = i! t^{i+1} phi_{i+1}(lam t)
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        out = np.zeros((len(lam), 2))
        for i in range(q, len(self.coef)):
            c = self.coef[i] * (math.factorial(i) // math.factorial(i - q))
            e = i - q
            w = np.array([math.factorial(e) * t ** (e + 1) * phi(e + 1, x * t) for x in lam])
            out += w[:, None] * c[None, :]
        return out


class SinusoidalForcing(ForcingProvider):
    """``f(t) = amp * sin(omega t + phase) + offset`` on each edge."""

    def __init__(self, amp=(1.0, 1.0), omega=1.0, phase=(0.0, 0.0), offset=(0.0, 0.0)):
        self.amp = np.broadcast_to(np.asarray(amp, dtype=float), (2,)).copy()
        self.phase = np.broadcast_to(np.asarray(phase, dtype=float), (2,)).copy()
        self.offset = np.broadcast_to(np.asarray(offset, dtype=float), (2,)).copy()
        self.omega = float(omega)

    def derivative(self, t, q):
        w = self.omega
        out = self.amp * w**q * np.sin(w * t + self.phase + q * math.pi / 2)
        if q == 0:
            out = out + self.offset
        return out

    def convolve(self, lam, t, q=0):
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        w = self.omega
        ph = self.phase + q * math.pi / 2
        amp = self.amp * w**q
        out = np.zeros((len(lam), 2))
        for i, x in enumerate(lam):
            # Im of e^{i ph} (e^{i w t} - e^{x t}) / (i w - x)
            c = (np.exp(1j * (w * t + ph)) - math.exp(x * t) * np.exp(1j * ph)) / (1j * w - x)
            out[i] = amp * c.imag
            if q == 0:
                out[i] += self.offset * t * phi(1, x * t)
        return out

    def sup_abs(self, q, t0, t1, samples=2001):
        if q > 0:
            return float(np.max(np.abs(self.amp)) * self.omega**q)
        return super().sup_abs(q, t0, t1, samples)


class ExponentialForcing(ForcingProvider):
    """``f(t) = amp * exp(rate t)``; no Taylor coefficient vanishes when ``rate != 0``."""

    def __init__(self, amp=(1.0, 1.0), rate=1.0):
        self.amp = np.broadcast_to(np.asarray(amp, dtype=float), (2,)).copy()
        self.rate = float(rate)

    def derivative(self, t, q):
        return self.amp * self.rate**q * math.exp(self.rate * t)

    def convolve(self, lam, t, q=0):
        # int_0^t e^{r s} e^{lam (t-s)} ds = t e^{lam t} phi_1((r - lam) t)
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        w = np.array([t * math.exp(x * t) * phi(1, (self.rate - x) * t) for x in lam])
        return w[:, None] * (self.amp * self.rate**q)[None, :]

    def sup_abs(self, q, t0, t1, samples=2001):
        ends = [abs(self.rate) ** q * math.exp(self.rate * s) for s in (t0, t1)]
        return float(np.max(np.abs(self.amp)) * max(ends))


class CallableForcing(ForcingProvider):
    """User functions ``t -> (f_-n, f_n)``; derivatives must be given explicitly."""

    def __init__(self, func: Callable, derivs: Sequence[Callable] = ()):
        self.funcs = [func, *derivs]

    def derivative(self, t, q):
        if q >= len(self.funcs):
            raise ValueError(f"derivative of order {q} not supplied")
        return np.asarray(self.funcs[q](t), dtype=float)


class HistoryForcing(ForcingProvider):
    """Forcing known only at sample instants ``t_m = m * step``.

    Derivatives at ``t_m`` come from backward differences over the last
    ``Q`` samples, i.e. derivatives of the degree ``Q-1`` interpolant.
    Values between samples are held (zeroth-order), so this provider is only
    meant for mesoscale stepping.
    """

    def __init__(self, step: float, samples, order: int = 1):
        _check_Q(order)
        self.step = float(step)
        self.samples = np.asarray(samples, dtype=float).reshape(-1, 2)
        self.order = order

    def _index(self, t):
        m = t / self.step
        mi = int(round(m))
        if abs(m - mi) > 1e-9:
            mi = int(math.floor(m))
        return min(mi, len(self.samples) - 1)

    def derivative(self, t, q):
        m = self._index(t)
        width = min(self.order, m + 1)
        if q >= width:
            return np.zeros(2)
        ts = -np.arange(width) * self.step
        V = np.vander(ts, width, increasing=True)
        coef = np.linalg.solve(V, self.samples[m - np.arange(width)])
        return coef[q] * math.factorial(q)


class HeldForcing(ForcingProvider):
    """The Taylor-extrapolated forcing a patch sees under mesoscale coupling."""

    def __init__(self, source: ForcingProvider, delta_t: float, Q: int):
        _check_Q(Q)
        self.source = source
        self.delta_t = float(delta_t)
        self.Q = Q

    def _split(self, t):
        m = math.floor(t / self.delta_t + 1e-9)
        return m * self.delta_t, max(0.0, t - m * self.delta_t)

    def derivative(self, t, q):
        return self._held(*self._split(t), q)

    def left_value(self, t):
        """Value approached from below; differs from ``value`` at hold instants."""
        t0, s = self._split(t)
        if s == 0.0 and t0 > 0:
            t0, s = t0 - self.delta_t, self.delta_t
        return self._held(t0, s, 0)

    def _held(self, t0, s, q):
        hist = self.source.derivatives(t0, self.Q)
        out = np.zeros(2)
        for p in range(q, self.Q):
            out += hist[p] * s ** (p - q) / math.factorial(p - q)
        return out


def write_forcing_csv(provider: ForcingProvider, schedule: MesoSchedule, fh) -> None:
    """Columns ``m, t, f_minus, f_plus, q`` for each instant and derivative order."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["m", "t", "f_minus", "f_plus", "q"])
    for m, t in enumerate(schedule.instants()):
        for q, fq in enumerate(provider.derivatives(float(t), schedule.Q)):
            w.writerow([m, repr(float(t)), repr(float(fq[0])), repr(float(fq[1])), q])


@dataclass(frozen=True)
class CouplingSpec:
    gamma: float
    r: float
    Q: int = 1
    provider: ForcingProvider | None = None

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma={self.gamma} outside [0, 1]")
        if not 0.0 < self.r < 0.5:
            raise ValueError(f"ratio r={self.r} outside (0, 1/2)")
        _check_Q(self.Q)

    @property
    def cos_ell(self) -> float:
        return nn_cos_ell(self.r, self.gamma)
