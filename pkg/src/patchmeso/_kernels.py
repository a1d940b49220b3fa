"""Hot loops: forced linear RK4 for one patch and the 2D Ginzburg-Landau stepper.

Each kernel exists twice, an explicit-loop version compiled with numba and a
vectorised numpy version. ``PATCHMESO_NUMBA=0`` in the environment (or numba
missing) selects numpy; both paths agree to rounding.
"""
from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and os.environ.get("PATCHMESO_NUMBA", "1") not in ("0", "false", "no")

# edge order used by the 2D coefficient arrays
WEST, EAST, SOUTH, NORTH = 0, 1, 2, 3
# source order: self then neighbours in +x, -x, +y, -y
SELF, SRC_E, SRC_W, SRC_N, SRC_S = 0, 1, 2, 3, 4


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


# --- one patch, linear, forced ------------------------------------------------

def rk4_forced_numpy(K, G, u0, F, dt):
    """Classical RK4 for ``u' = K u + G f(t)``.

    ``F[s]`` holds the forcing at the start, midpoint and end of step ``s``.
    """
    u = np.array(u0, dtype=float)
    for s in range(F.shape[0]):
        g0 = G @ F[s, 0]
        g1 = G @ F[s, 1]
        g2 = G @ F[s, 2]
        k1 = K @ u + g0
        k2 = K @ (u + 0.5 * dt * k1) + g1
        k3 = K @ (u + 0.5 * dt * k2) + g1
        k4 = K @ (u + dt * k3) + g2
        u = u + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return u


def _rk4_forced_loops(K, G, u0, F, dt):
    m = u0.shape[0]
    u = u0.copy()
    k1 = np.empty(m)
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    tmp = np.empty(m)
    g = np.empty((3, m))
    for s in range(F.shape[0]):
        for c in range(3):
            for i in range(m):
                g[c, i] = G[i, 0] * F[s, c, 0] + G[i, 1] * F[s, c, 1]
        for i in range(m):
            acc = g[0, i]
            for j in range(m):
                acc += K[i, j] * u[j]
            k1[i] = acc
        for i in range(m):
            tmp[i] = u[i] + 0.5 * dt * k1[i]
        for i in range(m):
            acc = g[1, i]
            for j in range(m):
                acc += K[i, j] * tmp[j]
            k2[i] = acc
        for i in range(m):
            tmp[i] = u[i] + 0.5 * dt * k2[i]
        for i in range(m):
            acc = g[1, i]
            for j in range(m):
                acc += K[i, j] * tmp[j]
            k3[i] = acc
        for i in range(m):
            tmp[i] = u[i] + dt * k3[i]
        for i in range(m):
            acc = g[2, i]
            for j in range(m):
                acc += K[i, j] * tmp[j]
            k4[i] = acc
        for i in range(m):
            u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return u


# --- 2D Ginzburg-Landau ---------------------------------------------------------

def _neighbour_centres_numpy(u):
    c = u.shape[2] // 2
    U = u[:, :, c, c]
    return np.stack(
        [U, np.roll(U, -1, 0), np.roll(U, 1, 0), np.roll(U, -1, 1), np.roll(U, 1, 1)], axis=-1
    )


def _apply_edges_numpy(u, C, src):
    """Overwrite the four edges (corners excluded) from ``C`` and the sources."""
    vals = np.einsum("xys,sep->xyep", src, C)
    u[:, :, 0, 1:-1] = vals[:, :, WEST]
    u[:, :, -1, 1:-1] = vals[:, :, EAST]
    u[:, :, 1:-1, 0] = vals[:, :, SOUTH]
    u[:, :, 1:-1, -1] = vals[:, :, NORTH]


def _gl_rhs_numpy(u, alpha, beta):
    c = u[:, :, 1:-1, 1:-1]
    lap = (
        u[:, :, 2:, 1:-1] + u[:, :, :-2, 1:-1] + u[:, :, 1:-1, 2:] + u[:, :, 1:-1, :-2] - 4.0 * c
    )
    return (1 + 1j * alpha) * lap + c - (1 + 1j * beta) * c * (c.real**2 + c.imag**2)


def gl_advance_numpy(u, nsteps, dt, alpha, beta, C, held, use_held):
    """``nsteps`` RK4 steps of all patch interiors.

    Edges are reset from the coupling at every stage. With ``use_held`` the
    neighbour sources come from ``held`` (shape ``(Px, Py, 5)``, the self
    column ignored) while the self source tracks the stage state.
    """
    u = u.copy()

    def stage_edges(x):
        src = _neighbour_centres_numpy(x)
        if use_held:
            src[..., 1:] = held[..., 1:]
        _apply_edges_numpy(x, C, src)

    for _ in range(nsteps):
        x = u.copy()
        stage_edges(x)
        k1 = _gl_rhs_numpy(x, alpha, beta)
        x = u.copy()
        x[:, :, 1:-1, 1:-1] += 0.5 * dt * k1
        stage_edges(x)
        k2 = _gl_rhs_numpy(x, alpha, beta)
        x = u.copy()
        x[:, :, 1:-1, 1:-1] += 0.5 * dt * k2
        stage_edges(x)
        k3 = _gl_rhs_numpy(x, alpha, beta)
        x = u.copy()
        x[:, :, 1:-1, 1:-1] += dt * k3
        stage_edges(x)
        k4 = _gl_rhs_numpy(x, alpha, beta)
        u[:, :, 1:-1, 1:-1] += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    stage_edges(u)
    return u


def _gl_stage_loops(x, C, held, use_held, alpha, beta, out):
    Px, Py, m = x.shape[0], x.shape[1], x.shape[2]
    c = m // 2
    src = np.empty(5, dtype=np.complex128)
    for ix in range(Px):
        for iy in range(Py):
            src[0] = x[ix, iy, c, c]
            if use_held:
                for s in range(1, 5):
                    src[s] = held[ix, iy, s]
            else:
                src[1] = x[(ix + 1) % Px, iy, c, c]
                src[2] = x[(ix - 1) % Px, iy, c, c]
                src[3] = x[ix, (iy + 1) % Py, c, c]
                src[4] = x[ix, (iy - 1) % Py, c, c]
            for p in range(m - 2):
                w = 0j
                e = 0j
                s_ = 0j
                nn = 0j
                for s in range(5):
                    w += C[s, 0, p] * src[s]
                    e += C[s, 1, p] * src[s]
                    s_ += C[s, 2, p] * src[s]
                    nn += C[s, 3, p] * src[s]
                x[ix, iy, 0, p + 1] = w
                x[ix, iy, m - 1, p + 1] = e
                x[ix, iy, p + 1, 0] = s_
                x[ix, iy, p + 1, m - 1] = nn
    a = 1.0 + 1j * alpha
    b = 1.0 + 1j * beta
    for ix in range(Px):
        for iy in range(Py):
            for jx in range(1, m - 1):
                for jy in range(1, m - 1):
                    v = x[ix, iy, jx, jy]
                    lap = (
                        x[ix, iy, jx + 1, jy] + x[ix, iy, jx - 1, jy]
                        + x[ix, iy, jx, jy + 1] + x[ix, iy, jx, jy - 1] - 4.0 * v
                    )
                    out[ix, iy, jx - 1, jy - 1] = a * lap + v - b * v * (v.real * v.real + v.imag * v.imag)


def _gl_advance_loops(u, nsteps, dt, alpha, beta, C, held, use_held):
    u = u.copy()
    Px, Py, m = u.shape[0], u.shape[1], u.shape[2]
    k = np.empty((4, Px, Py, m - 2, m - 2), dtype=np.complex128)
    x = np.empty_like(u)
    coef = (0.0, 0.5, 0.5, 1.0)
    for _ in range(nsteps):
        for st in range(4):
            x[:] = u
            if st > 0:
                for ix in range(Px):
                    for iy in range(Py):
                        for jx in range(m - 2):
                            for jy in range(m - 2):
                                x[ix, iy, jx + 1, jy + 1] += coef[st] * dt * k[st - 1, ix, iy, jx, jy]
            _gl_stage(x, C, held, use_held, alpha, beta, k[st])
        for ix in range(Px):
            for iy in range(Py):
                for jx in range(m - 2):
                    for jy in range(m - 2):
                        u[ix, iy, jx + 1, jy + 1] += dt / 6.0 * (
                            k[0, ix, iy, jx, jy] + 2.0 * k[1, ix, iy, jx, jy]
                            + 2.0 * k[2, ix, iy, jx, jy] + k[3, ix, iy, jx, jy]
                        )
    scratch = np.empty((Px, Py, m - 2, m - 2), dtype=np.complex128)
    _gl_stage(u, C, held, use_held, alpha, beta, scratch)
    return u


if numba is not None:
    rk4_forced_numba = numba.njit(cache=True)(_rk4_forced_loops)
    _gl_stage = numba.njit(cache=True)(_gl_stage_loops)
    gl_advance_numba = numba.njit(cache=True)(_gl_advance_loops)
else:  # pragma: no cover
    rk4_forced_numba = None
    _gl_stage = _gl_stage_loops
    gl_advance_numba = None


def rk4_forced(K, G, u0, F, dt):
    K = np.ascontiguousarray(K, dtype=float)
    G = np.ascontiguousarray(G, dtype=float)
    u0 = np.ascontiguousarray(u0, dtype=float)
    F = np.ascontiguousarray(F, dtype=float)
    if USE_NUMBA:
        return rk4_forced_numba(K, G, u0, F, float(dt))
    return rk4_forced_numpy(K, G, u0, F, dt)


def gl_advance(u, nsteps, dt, alpha, beta, C, held, use_held):
    u = np.ascontiguousarray(u, dtype=np.complex128)
    C = np.ascontiguousarray(C, dtype=float)
    held = np.ascontiguousarray(held, dtype=np.complex128)
    if USE_NUMBA:
        return gl_advance_numba(u, int(nsteps), float(dt), float(alpha), float(beta), C, held, bool(use_held))
    return gl_advance_numpy(u, nsteps, dt, alpha, beta, C, held, use_held)
