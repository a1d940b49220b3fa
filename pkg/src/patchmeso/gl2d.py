"""Patch dynamics for the 2D complex Ginzburg-Landau lattice equation.

Each patch is a ``(2n+1) x (2n+1)`` block of complex values on a periodic
``Px x Py`` grid of patches. The macroscale value of a patch is its centre
value; edges (corners excluded) are set from the centre and the four
neighbouring centres by nearest-neighbour interpolation. In mesoscale mode
the neighbour centres are frozen at the instants ``m * delta_t`` while the
patch's own centre stays current.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import _kernels
from ._kernels import EAST, NORTH, SOUTH, WEST
from .errors import BlowupError

__all__ = [
    "GLConfig",
    "GLRun",
    "reference_config",
    "coupling_coefficients",
    "gl_rhs",
    "gl_coupling_2d",
    "initial_field",
    "run_gl2d",
    "compare_macroscale",
    "stability_check",
    "write_fields_csv",
    "write_macro_csv",
]

BLOWUP = 1e6
MODES = ("continuous", "meso")


def _ratio_int(x, y, what):
    q = x / y
    if abs(q - round(q)) > 1e-9 * max(1.0, abs(q)):
        raise ValueError(f"{what} must be an integer, got {q}")
    return int(round(q))


@dataclass(frozen=True)
class GLConfig:
    alpha: float = 1.0
    beta: float = 2.0
    domain_width: float = 20.0
    h: float = 0.25
    H: float = 5.0
    n: int = 6
    gamma: float = 1.0
    delta_t: float = 0.2
    dt_micro: float = 1e-3
    t_end: float = 0.4
    seed: int = 0
    init_amplitude: float = 0.5
    noise_std: float = 0.8
    as_printed: bool = False
    snapshot_times: tuple = (0.04, 0.4)

    def __post_init__(self):
        if self.h <= 0 or self.H <= 0 or self.domain_width <= 0:
            raise ValueError("lengths must be positive")
        _ratio_int(self.H, self.h, "H/h")
        _ratio_int(self.domain_width, self.H, "domain_width/H")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")
        if not self.n * self.h / self.H < 0.5:
            raise ValueError("patches overlap: n*h/H must be < 1/2")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.dt_micro <= 0 or self.delta_t <= 0 or self.t_end < 0:
            raise ValueError("time steps must be positive")
        _ratio_int(self.t_end, self.dt_micro, "t_end/dt_micro")

    @property
    def N(self) -> int:
        return _ratio_int(self.H, self.h, "H/h")

    @property
    def patches(self) -> int:
        return _ratio_int(self.domain_width, self.H, "domain_width/H")

    @property
    def r(self) -> float:
        return self.n * self.h / self.H

    @property
    def steps_per_exchange(self) -> int:
        return _ratio_int(self.delta_t, self.dt_micro, "delta_t/dt_micro")


def reference_config(**overrides) -> GLConfig:
    """Width 20, h=0.25, H=5, n=6, alpha=1, beta=2, delta_t=0.2."""
    return replace(GLConfig(), **overrides)


def _edge_coefficients(rx, ry, gamma, as_printed):
    sign = -1.0 if as_printed else 1.0
    return np.array([
        1.0 - (rx * rx + sign * ry * ry) * gamma,
        0.5 * rx * gamma * (rx + 1.0),
        0.5 * rx * gamma * (rx - 1.0),
        0.5 * ry * gamma * (ry + 1.0),
        0.5 * ry * gamma * (ry - 1.0),
    ])


def coupling_coefficients(cfg: GLConfig) -> np.ndarray:
    """``C[source, edge, p]`` with sources (self, +x, -x, +y, -y).

    Edges are ordered west, east, south, north; ``p`` runs along the edge
    over ``j = -(n-1) .. n-1``.
    """
    n = cfg.n
    C = np.zeros((5, 4, 2 * n - 1))
    for p, j in enumerate(range(-(n - 1), n)):
        rj = j * cfg.h / cfg.H
        C[:, WEST, p] = _edge_coefficients(-cfg.r, rj, cfg.gamma, cfg.as_printed)
        C[:, EAST, p] = _edge_coefficients(cfg.r, rj, cfg.gamma, cfg.as_printed)
        C[:, SOUTH, p] = _edge_coefficients(rj, -cfg.r, cfg.gamma, cfg.as_printed)
        C[:, NORTH, p] = _edge_coefficients(rj, cfg.r, cfg.gamma, cfg.as_printed)
    return C


def gl_rhs(u: np.ndarray, alpha: float, beta: float, diffusion_only: bool = False) -> np.ndarray:
    """Time derivative on the interior ``(2n-1)^2`` points of one patch."""
    u = np.asarray(u, dtype=complex)
    c = u[1:-1, 1:-1]
    lap = u[2:, 1:-1] + u[:-2, 1:-1] + u[1:-1, 2:] + u[1:-1, :-2] - 4.0 * c
    if diffusion_only:
        return (1 + 1j * alpha) * lap
    return (1 + 1j * alpha) * lap + c - (1 + 1j * beta) * c * np.abs(c) ** 2


def gl_coupling_2d(cfg: GLConfig, U_self, U_E, U_W, U_N, U_S, jx: int, jy: int) -> complex:
    """Edge value at ``(jx, jy)`` from the centre and neighbour macroscale values."""
    n = cfg.n
    on_x = abs(jx) == n
    on_y = abs(jy) == n
    if on_x and on_y:
        raise ValueError("corner points carry no coupling condition")
    if not (on_x or on_y) or abs(jx) > n or abs(jy) > n:
        raise ValueError(f"({jx}, {jy}) is not on a patch edge")
    rx = jx * cfg.h / cfg.H
    ry = jy * cfg.h / cfg.H
    c = _edge_coefficients(rx, ry, cfg.gamma, cfg.as_printed)
    return complex(c @ np.array([U_self, U_E, U_W, U_N, U_S], dtype=complex))


def initial_field(cfg: GLConfig) -> np.ndarray:
    """Sinusoid (one period across the domain) plus real Gaussian noise.

    Each patch draws its noise from its own stream keyed by
    ``(seed, ix, iy)``, so the field does not depend on evaluation order.
    """
    P, n = cfg.patches, cfg.n
    j = np.arange(-n, n + 1) * cfg.h
    k = 2 * math.pi / cfg.domain_width
    u = np.zeros((P, P, 2 * n + 1, 2 * n + 1), dtype=complex)
    for ix in range(P):
        for iy in range(P):
            x = ix * cfg.H + j
            y = iy * cfg.H + j
            base = cfg.init_amplitude * np.outer(np.sin(k * x), np.sin(k * y))
            rng = np.random.default_rng([cfg.seed, ix, iy])
            u[ix, iy] = base + rng.normal(0.0, cfg.noise_std, size=base.shape)
    return u


@dataclass
class GLRun:
    cfg: GLConfig
    mode: str
    times: np.ndarray
    U: np.ndarray
    snapshots: dict = field(default_factory=dict)

    def U_at(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9:
            raise ValueError(f"no macroscale record at t={t}")
        return self.U[i]


def _centres(u):
    c = u.shape[2] // 2
    return u[:, :, c, c]


def _held_sources(u):
    U = _centres(u)
    return np.stack([U, np.roll(U, -1, 0), np.roll(U, 1, 0), np.roll(U, -1, 1), np.roll(U, 1, 1)], axis=-1)


def run_gl2d(cfg: GLConfig, mode: str = "continuous", record_every: int = 1,
             stale_steps: int = 0, on_exchange: Callable | None = None,
             initial: np.ndarray | None = None) -> GLRun:
    """Integrate all patches to ``cfg.t_end``.

    ``record_every`` micro steps between macroscale records. ``stale_steps``
    (experimental, mesoscale mode only) couples to neighbour data that many
    exchanges old. ``on_exchange(m, t, held)`` observes every exchange and
    cannot change the trajectory. ``initial`` replaces the seeded field.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if stale_steps and mode != "meso":
        raise ValueError("stale_steps applies to mesoscale coupling only")
    C = coupling_coefficients(cfg)
    u = initial_field(cfg) if initial is None else np.array(initial, dtype=complex)
    n, P = cfg.n, cfg.patches
    if u.shape != (P, P, 2 * n + 1, 2 * n + 1):
        raise ValueError(f"initial field has shape {u.shape}")
    dt = cfg.dt_micro
    total = _ratio_int(cfg.t_end, dt, "t_end/dt_micro")
    per_exchange = cfg.steps_per_exchange if mode == "meso" else None
    snap_steps = {_ratio_int(t, dt, "snapshot time/dt_micro"): t for t in cfg.snapshot_times if t <= cfg.t_end + 1e-12}

    held = _held_sources(u)
    history = []
    # impose the coupling on the stored initial edges
    u = _kernels.gl_advance(u, 0, dt, cfg.alpha, cfg.beta, C, held, mode == "meso")

    marks = {0, total}
    marks.update(range(0, total + 1, record_every))
    marks.update(snap_steps)
    if per_exchange:
        marks.update(range(0, total + 1, per_exchange))
    marks = sorted(m for m in marks if m <= total)

    times, Us, snaps = [], [], {}
    step = 0
    for target in marks:
        if target > step:
            u = _kernels.gl_advance(u, target - step, dt, cfg.alpha, cfg.beta, C, held, mode == "meso")
            step = target
            peak = float(np.max(np.abs(u[:, :, 1:-1, 1:-1])))
            if not np.isfinite(peak) or peak > BLOWUP:
                raise BlowupError(step * dt, peak)
        if per_exchange and step % per_exchange == 0 and step < total:
            m = step // per_exchange
            history.append(_held_sources(u))
            held = history[max(0, len(history) - 1 - stale_steps)]
            if on_exchange is not None:
                on_exchange(m, step * dt, held.copy())
            u = _kernels.gl_advance(u, 0, dt, cfg.alpha, cfg.beta, C, held, True)
        if step % record_every == 0 or step == total:
            times.append(step * dt)
            Us.append(_centres(u).copy())
        if step in snap_steps:
            snaps[snap_steps[step]] = u.copy()
    return GLRun(cfg, mode, np.array(times), np.array(Us), snaps)


def stability_check(cfg: GLConfig, steps: int = 20, tol: float = 1e-6) -> float:
    """Continuous-mode RMS change in ``U`` when ``dt_micro`` is halved.

    Raises ``ValueError`` when the change over ``steps`` steps exceeds ``tol``.
    """
    t = steps * cfg.dt_micro
    a = run_gl2d(replace(cfg, t_end=t, snapshot_times=()), "continuous", record_every=steps)
    b = run_gl2d(replace(cfg, t_end=t, dt_micro=cfg.dt_micro / 2, snapshot_times=()),
                 "continuous", record_every=2 * steps)
    diff = float(np.sqrt(np.mean(np.abs(a.U[-1] - b.U[-1]) ** 2)))
    if not diff <= tol:
        raise ValueError(f"dt_micro={cfg.dt_micro} unresolved: halving changes U by {diff:.3g}")
    return diff


def compare_macroscale(run_a: GLRun, run_b: GLRun, t: float) -> float:
    """RMS over patches of ``|U_a - U_b|`` at time ``t``."""
    Ua, Ub = run_a.U_at(t), run_b.U_at(t)
    if Ua.shape != Ub.shape:
        raise ValueError("runs use different patch grids")
    return float(np.sqrt(np.mean(np.abs(Ua - Ub) ** 2)))


def write_fields_csv(run: GLRun, fh) -> None:
    """Columns ``t, i_x, i_y, j_x, j_y, re_u, im_u``; corners omitted."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t", "i_x", "i_y", "j_x", "j_y", "re_u", "im_u"])
    n = run.cfg.n
    for t in sorted(run.snapshots):
        u = run.snapshots[t]
        for ix in range(u.shape[0]):
            for iy in range(u.shape[1]):
                for jx in range(-n, n + 1):
                    for jy in range(-n, n + 1):
                        if abs(jx) == n and abs(jy) == n:
                            continue
                        v = u[ix, iy, jx + n, jy + n]
                        w.writerow([repr(float(t)), ix, iy, jx, jy, repr(float(v.real)), repr(float(v.imag))])


def write_macro_csv(run: GLRun, fh, header: bool = True) -> None:
    """Columns ``t, i_x, i_y, re_U, im_U, mode, delta_t, seed``."""
    w = csv.writer(fh, lineterminator="\n")
    if header:
        w.writerow(["t", "i_x", "i_y", "re_U", "im_U", "mode", "delta_t", "seed"])
    dt = repr(float(run.cfg.delta_t)) if run.mode == "meso" else ""
    for t, U in zip(run.times, run.U):
        for ix in range(U.shape[0]):
            for iy in range(U.shape[1]):
                v = U[ix, iy]
                w.writerow([repr(float(t)), ix, iy, repr(float(v.real)), repr(float(v.imag)),
                            run.mode, dt, run.cfg.seed])
