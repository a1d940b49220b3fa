"""Time evolution inside one patch.

Three routes to the same field: the spectral solution with continuous
coupling, mesoscale stepping with Taylor-held forcing, and direct RK4 on the
interior equations. All work in modal coordinates ``c_k = z_k^T B u`` where
that is natural; the forcing only enters through the edge entries of ``z_k``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import _kernels
from ._special import phi
from .coupling import Q_MAX, ForcingProvider
from .errors import QuadratureError
from .geometry import PatchGeometry
from .operator import PatchOperator, assemble_operator
from .spectral import EigenSystem

__all__ = [
    "FieldVector",
    "MesoHistory",
    "operator_for",
    "transition_matrix",
    "exact_solution",
    "direct_integrate",
    "meso_step",
    "meso_run",
    "meso_run_composed",
    "remainder_exact",
    "edge_remainders",
    "write_trajectory_csv",
]

QUAD_RTOL = 1e-12


@dataclass
class FieldVector:
    """Field ``u_j`` for ``j = -n..n`` at time ``t``."""

    u: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        if self.u.ndim != 1 or len(self.u) % 2 == 0:
            raise ValueError("field must be a 1D array of odd length 2n+1")
        if not np.all(np.isfinite(self.u)):
            raise ValueError("field has non-finite entries")

    @property
    def n(self) -> int:
        return (len(self.u) - 1) // 2

    @property
    def interior(self) -> np.ndarray:
        return self.u[1:-1]

    def masked(self) -> "FieldVector":
        """``B u``: edges zeroed."""
        v = self.u.copy()
        v[0] = v[-1] = 0.0
        return FieldVector(v, self.t)


def _as_field(u0, n) -> np.ndarray:
    u = u0.u if isinstance(u0, FieldVector) else np.asarray(u0, dtype=float)
    if len(u) != 2 * n + 1:
        raise ValueError(f"field of length {len(u)} does not fit a patch with n={n}")
    return u


def operator_for(es: EigenSystem) -> PatchOperator:
    """The operator an eigensystem belongs to (``N`` plays no role in ``L``)."""
    return assemble_operator(PatchGeometry(es.n, es.a, 2 * es.n + 1), es.cos_ell)


def transition_matrix(es: EigenSystem, t: float) -> np.ndarray:
    """``T(t) = sum_k e^{lam_k t} v_k z_k^T``."""
    es.require_complete()
    if t < 0:
        raise ValueError("t must be nonnegative")
    return es.V.T @ (np.exp(es.lam * t)[:, None] * es.Z)


def _modal(es, u):
    """``c_k = z_k^T B u``."""
    return es.Z[:, 1:-1] @ u[1:-1]


def _edge_z(es):
    return es.Z[:, [0, -1]]


def exact_solution(es: EigenSystem, u0, provider: ForcingProvider, t: float) -> FieldVector:
    """Field at ``t`` under continuous coupling with edge forcing ``provider``."""
    es.require_complete()
    u = _as_field(u0, es.n)
    c = _modal(es, u)
    conv = provider.convolve(es.lam, t)
    w = np.einsum("ke,ke->k", _edge_z(es), conv)
    out = es.V.T @ (np.exp(es.lam * t) * c + w)
    f = provider.value(t)
    out[0] += f[0]
    out[-1] += f[1]
    return FieldVector(out, t)


def direct_integrate(op: PatchOperator, u0, provider: ForcingProvider, t: float,
                     dt_micro: float | None = None) -> FieldVector:
    """Classical RK4 on the interior equations, edges solved from the coupling.

    Forcing is sampled at each stage time; at step ends the left limit is used
    so held (piecewise) forcing integrates correctly when steps align with
    the hold intervals.
    """
    n = op.n
    u = _as_field(u0, n)
    if dt_micro is None:
        dt_micro = min(t / 500.0, 1e-3) if t > 0 else 1e-3
    if not 0 < dt_micro <= 0.1:
        raise ValueError("dt_micro must lie in (0, 0.1] for stability")
    S = op.edge_solver()
    K = op.reduced()
    G = op.L[1:-1][:, [0, -1]] @ S[:, -2:]
    steps = max(1, int(math.ceil(t / dt_micro - 1e-9))) if t > 0 else 0
    F = np.zeros((steps, 3, 2))
    if steps:
        dt = t / steps
        for s in range(steps):
            t0 = s * dt
            F[s, 0] = provider.value(t0)
            F[s, 1] = provider.value(t0 + 0.5 * dt)
            F[s, 2] = _left_value(provider, t0 + dt)
        uI = _kernels.rk4_forced(K, G, u[1:-1], F, dt)
    else:
        uI = u[1:-1].copy()
    fend = _left_value(provider, t)
    return FieldVector(op.complete_field(uI, fend[0], fend[1]), t)


def _left_value(provider, t):
    left = getattr(provider, "left_value", None)
    return np.asarray(left(t) if left else provider.value(t), dtype=float)


def _check_derivs(derivs, Q):
    if int(Q) != Q or not 1 <= Q <= Q_MAX:
        raise ValueError(f"Q={Q} must be an integer in 1..{Q_MAX}")
    derivs = [np.asarray(d, dtype=float) for d in derivs]
    if len(derivs) < Q:
        raise ValueError(f"Q={Q} needs derivatives of order 0..{Q - 1}, got {len(derivs)}")
    return derivs[:Q]


def _gains(es, delta_t, Q):
    """``g[q-1, k] = delta_t^q phi_q(lam_k delta_t) = lam^-q (mu - sum_{p<q} ...)``."""
    return np.array(
        [[delta_t**q * phi(q, lam * delta_t) for lam in es.lam] for q in range(1, Q + 1)]
    )


def meso_step(es: EigenSystem, u0, derivs, delta_t: float, Q: int) -> FieldVector:
    """``B u(delta_t)`` with forcing held as its order ``Q-1`` Taylor polynomial."""
    es.require_complete()
    derivs = _check_derivs(derivs, Q)
    u = _as_field(u0, es.n)
    mu = np.exp(es.lam * delta_t)
    gains = _gains(es, delta_t, Q)
    zb = _edge_z(es)
    c = mu * _modal(es, u)
    for q in range(1, Q + 1):
        c = c + (zb @ derivs[q - 1]) * gains[q - 1]
    out = es.V.T @ c
    out[0] = out[-1] = 0.0
    return FieldVector(out, delta_t)


@dataclass
class MesoHistory:
    """Per-mode accumulators ``f_M^q = sum_m mu^{M-m-1} z_k . f^q(m delta_t)``."""

    mu: np.ndarray
    Q: int
    acc: np.ndarray = field(init=False)
    M: int = field(init=False, default=0)

    def __post_init__(self):
        self.acc = np.zeros((self.Q, len(self.mu)))

    def push(self, projected):
        """Add one instant; ``projected[q, k] = z_k . f^q(m delta_t)``."""
        self.acc = self.mu[None, :] * self.acc + projected
        self.M += 1


def _edge_values(op, uI, held_end):
    return op.complete_field(uI, held_end[0], held_end[1])


def meso_run(es: EigenSystem, u0, provider: ForcingProvider, schedule, op=None,
             trajectory: bool = False):
    """``M`` mesoscale steps through the accumulated-history form.

    The edges of each returned field are rebuilt from the coupling condition
    with the forcing extrapolated to the end of the step from the derivatives
    held at its start. With ``trajectory`` a list of fields at every
    ``m delta_t`` is returned instead of the final field.
    """
    es.require_complete()
    dt, M, Q = schedule.delta_t, schedule.M, schedule.Q
    if op is None:
        op = operator_for(es)
    u = _as_field(u0, es.n)
    mu = np.exp(es.lam * dt)
    gains = _gains(es, dt, Q)
    zb = _edge_z(es)
    c0 = _modal(es, u)
    hist = MesoHistory(mu, Q)
    frames = [FieldVector(u.copy(), 0.0)]
    for m in range(M):
        derivs = provider.derivatives(m * dt, Q)
        hist.push(np.array([zb @ d for d in derivs]))
        c = mu ** (m + 1) * c0 + np.einsum("qk,qk->k", hist.acc, gains)
        if trajectory or m == M - 1:
            held_end = sum(d * dt**q / math.factorial(q) for q, d in enumerate(derivs))
            uI = (es.V.T @ c)[1:-1]
            frames.append(FieldVector(_edge_values(op, uI, held_end), (m + 1) * dt))
    return frames if trajectory else frames[-1]


def meso_run_composed(es: EigenSystem, u0, provider: ForcingProvider, schedule) -> FieldVector:
    """``B u(M delta_t)`` by applying ``meso_step`` ``M`` times."""
    u = _as_field(u0, es.n)
    fv = FieldVector(u.copy(), 0.0)
    for m in range(schedule.M):
        derivs = provider.derivatives(m * schedule.delta_t, schedule.Q)
        fv = meso_step(es, fv, derivs, schedule.delta_t, schedule.Q)
    return FieldVector(fv.u, schedule.M * schedule.delta_t)


def edge_remainders(R: np.ndarray, n: int, a: int) -> tuple[float, float]:
    """``R_{+-n} = -sum`` of ``R_j`` over the action region short of the edge."""
    j = np.arange(-n, n + 1)
    right = (j >= n - 2 * a) & (j <= n - 1)
    left = (j <= -(n - 2 * a)) & (j >= -(n - 1))
    return -float(np.sum(R[left])), -float(np.sum(R[right]))


def remainder_exact(es: EigenSystem, provider: ForcingProvider, delta_t: float, Q: int,
                    M: int = 1) -> FieldVector:
    """Remainder vector ``R`` of the ``M``-step mesoscale solution.

    ``R_j = sum_k v_kj int_0^dt [z_k . f_M^Q(t')] s^Q phi_Q(lam_k s) dt'`` with
    ``s = dt - t'``, which is the resummed power series in ``lam_k``.
    """
    es.require_complete()
    if int(Q) != Q or not 1 <= Q <= Q_MAX:
        raise ValueError(f"Q={Q} must be an integer in 1..{Q_MAX}")
    lam = es.lam
    mu = np.exp(lam * delta_t)
    zb = _edge_z(es)

    def g(tp):
        s = delta_t - tp
        acc = np.zeros(len(lam))
        for m in range(M):
            acc += mu ** (M - m - 1) * (zb @ provider.derivative(tp + m * delta_t, Q))
        kern = np.array([s**Q * phi(Q, x * s) for x in lam])
        return acc * kern

    coef, err = integrate.quad_vec(g, 0.0, delta_t, epsabs=1e-300, epsrel=QUAD_RTOL, limit=2000)
    scale = max(float(np.max(np.abs(coef))), 1e-300)
    if err > 10 * QUAD_RTOL * scale and err > 1e-16:
        raise QuadratureError(err / scale, QUAD_RTOL)
    R = es.V.T @ coef
    R[0], R[-1] = edge_remainders(R, es.n, es.a)
    return FieldVector(R, M * delta_t)


def write_trajectory_csv(frames, fh) -> None:
    """Columns ``t, j, u_j``."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t", "j", "u_j"])
    for fv in frames:
        n = fv.n
        for j in range(-n, n + 1):
            w.writerow([repr(float(fv.t)), j, repr(float(fv.u[j + n]))])
