"""Matrix form of the single-patch problem and a dense eigen-solver oracle.

The patch ODE reads ``B du/dt = L u + f`` with ``B = diag(0, 1, ..., 1, 0)``;
the first and last rows of ``L`` are the coupling conditions, so the edge
values ``u_{+-n}`` are algebraic functions of the interior.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy import linalg

from .errors import ConstraintError, DegenerateSpectrumError
from .geometry import PatchGeometry
from .spectral import EigenSystem, _family1_wavenumber, mass_matrix

__all__ = [
    "PatchOperator",
    "BoundaryMatrix",
    "assemble_operator",
    "assemble_boundary_matrix",
    "numeric_eigensystem",
    "verify_transition_identity",
    "DEGENERACY_RTOL",
    "REFINE_GAP",
]

DEGENERACY_RTOL = 1e-9
# modes closer than this to a neighbour get an extended-precision polish
REFINE_GAP = 1e-3


@dataclass(frozen=True)
class PatchOperator:
    B: np.ndarray
    L: np.ndarray
    cos_ell: float
    geometry: PatchGeometry

    @property
    def n(self) -> int:
        return self.geometry.n

    def edge_blocks(self):
        """``(L_bb, L_bI)``: edge rows restricted to edge and interior columns."""
        L = self.L
        rows = [0, -1]
        L_bb = L[np.ix_(rows, rows)]
        L_bI = L[rows, 1:-1]
        return L_bb, L_bI

    def edge_solver(self) -> np.ndarray:
        """Matrix ``S`` with ``u_edges = S @ [u_interior; f_-n; f_n]``."""
        L_bb, L_bI = self.edge_blocks()
        if abs(np.linalg.det(L_bb)) < 1e-14:
            raise ConstraintError("edge coefficients of the coupling rows are singular")
        inv = -np.linalg.inv(L_bb)
        return np.hstack([inv @ L_bI, inv])

    def reduced(self) -> np.ndarray:
        """Interior operator ``K`` after eliminating the edge values."""
        L = self.L
        S = self.edge_solver()[:, :-2]
        return L[1:-1, 1:-1] + L[1:-1][:, [0, -1]] @ S

    def complete_field(self, interior, f_minus=0.0, f_plus=0.0) -> np.ndarray:
        """Full ``2n+1`` field with edges taken from the coupling condition."""
        interior = np.asarray(interior)
        S = self.edge_solver()
        edges = S @ np.concatenate([interior, [f_minus, f_plus]])
        return np.concatenate([[edges[0]], interior, [edges[1]]])

    def coupling_residual(self, u, f_minus=0.0, f_plus=0.0) -> np.ndarray:
        """Edge-row residuals ``(L u + f)_{+-n}``; zero when coupling holds."""
        u = np.asarray(u)
        r = self.L[[0, -1]] @ u
        return r + np.array([f_minus, f_plus])


@dataclass(frozen=True)
class BoundaryMatrix:
    A: np.ndarray


def assemble_operator(g: PatchGeometry, cos_ell: float) -> PatchOperator:
    if not 0.0 < cos_ell <= 1.0:
        raise ValueError(f"cos_ell={cos_ell} outside (0, 1]")
    if cos_ell <= 0.6:
        warnings.warn(
            f"cos_ell={cos_ell} is below the range produced by practical couplings (> 0.6)",
            stacklevel=2,
        )
    n, a = g.n, g.a
    size = 2 * n + 1
    L = np.zeros((size, size))
    idx = np.arange(1, size - 1)
    L[idx, idx] = -2.0
    L[idx, idx - 1] = 1.0
    L[idx, idx + 1] = 1.0
    js = np.arange(-n, n + 1)
    core = np.abs(js) <= a
    for row, sgn in ((0, -1), (size - 1, 1)):
        action = (sgn * js >= n - 2 * a) & (sgn * js <= n)
        L[row, action] -= 1.0
        L[row, core] += cos_ell
    return PatchOperator(mass_matrix(n), L, float(cos_ell), g)


def assemble_boundary_matrix(op: PatchOperator) -> BoundaryMatrix:
    """Matrix ``A`` with ``sum_k v_k z_k^T = B + A``.

    Off-corner entries copy the first/last rows and columns of ``L``. The
    four corners solve ``(L A)_{+-n, +-n} = 0`` given ``A_{+-(n-1), +-n} = 1``;
    they come out as ``-1`` and ``0`` only when ``L_{+-n, +-(n-1)} = -1``,
    which fails for ``a = 0`` and ``a = n - 1``.
    """
    L = op.L
    A = np.zeros_like(L)
    A[:, [0, -1]] = L[:, [0, -1]]
    A[[0, -1], :] = L[[0, -1], :]
    L_bb, _ = op.edge_blocks()
    rhs = -L[[0, -1]][:, [1, -2]]
    A[np.ix_([0, -1], [0, -1])] = np.linalg.solve(L_bb, rhs)
    return BoundaryMatrix(A)


def _parity_bases(n):
    """Orthonormal even and odd bases over the interior ``j = -(n-1)..n-1``."""
    m = 2 * n - 1
    c = n - 1
    E = np.zeros((m, n))
    E[c, 0] = 1.0
    for i in range(1, n):
        E[c + i, i] = E[c - i, i] = math.sqrt(0.5)
    O = np.zeros((m, n - 1))
    for i in range(1, n):
        O[c + i, i - 1] = math.sqrt(0.5)
        O[c - i, i - 1] = -math.sqrt(0.5)
    return E, O


def _label(n, a, ell, lam, parity, tol=1e-6):
    """Conventional mode index recovered from the wavenumber of ``lam``."""
    d = n - a
    theta = math.acos(min(1.0, max(-1.0, 1.0 + lam / 2.0)))
    for k in range(parity, 2 * (d - 1) + 1, 2):
        if abs(_family1_wavenumber(k, ell) * math.pi / (2 * d) - theta) < tol:
            return k
    return _core_label(n, a, lam, parity, tol)


def _core_label(n, a, lam, parity, tol=1e-6):
    """Index of the core-scale mode with eigenvalue ``lam``, or -1."""
    d = n - a
    theta = math.acos(min(1.0, max(-1.0, 1.0 + lam / 2.0)))
    lc = (2 * a + 1) * theta / math.pi
    s = round(lc / 2)
    if 1 <= s <= a and abs(lc - 2 * s) < tol * (2 * a + 1):
        m = 2 * s - 1 if parity else 2 * s
        return m + 2 * (d - 1)
    return -1


def _polish(Kp, lam, x, transpose=False, dps=40, sweeps=2):
    """Inverse iteration at ``dps`` digits; float64 vectors of nearly
    coincident modes are only accurate to ``eps / gap``."""
    with mpmath.workdps(dps):
        M = mpmath.matrix((Kp.T if transpose else Kp).tolist())
        x = mpmath.matrix(x.tolist())
        mu = mpmath.mpf(float(lam))
        for _ in range(sweeps):
            shifted = M - mu * mpmath.eye(M.rows)
            y = mpmath.lu_solve(shifted, x)
            x = y / mpmath.norm(y)
            mu = (x.T * M * x)[0] / (x.T * x)[0]
        return np.array([float(t) for t in x]), float(mu)


def numeric_eigensystem(op: PatchOperator) -> EigenSystem:
    """Dense solve of the generalised problem, one parity block at a time.

    Modes come back in ascending ``|lambda|`` (even parity first on ties),
    each normalised so ``z^T B v = 1`` with ``|v| = |z|`` and the largest
    entry of ``v`` positive.
    """
    g = op.geometry
    n, a = g.n, g.a
    K = op.reduced()
    S = op.edge_solver()[:, :-2]
    L_bb, L_bI = op.edge_blocks()
    Sz = -np.linalg.inv(L_bb).T @ op.L[1:-1][:, [0, -1]].T

    ell = math.acos(op.cos_ell)
    found = []
    for parity, P in enumerate(_parity_bases(n)):
        if P.shape[1] == 0:
            continue
        Kp = P.T @ K @ P
        w, vl, vr = linalg.eig(Kp, left=True, right=True)
        if np.max(np.abs(w.imag)) > 1e-9:
            raise DegenerateSpectrumError([], "complex eigenvalues: operator not diagonalisable")
        lam = w.real
        order = np.argsort(-lam)
        lam, vl, vr = lam[order], vl[:, order].real, vr[:, order].real
        labels = [_label(n, a, ell, x, parity) for x in lam]
        close = [
            (labels[i], labels[i + 1]) if labels[i] != labels[i + 1]
            else (labels[i], _core_label(n, a, lam[i], parity))
            for i in range(len(lam) - 1)
            if abs(lam[i] - lam[i + 1]) < DEGENERACY_RTOL * max(1.0, abs(lam[i]))
        ]
        if close:
            raise DegenerateSpectrumError(close)
        for i in range(len(lam)):
            vi, zi, li = vr[:, i], vl[:, i], lam[i]
            gap = np.min(np.abs(np.delete(lam, i) - lam[i])) if len(lam) > 1 else np.inf
            if gap < REFINE_GAP:
                vi, li = _polish(Kp, li, vi)
                zi, _ = _polish(Kp, li, zi, transpose=True)
            found.append((li, parity, labels[i], P @ vi, P @ zi))

    found.sort(key=lambda t: (round(abs(t[0]), 9), t[1]))
    size = 2 * n + 1
    ks, lams, Vs, Zs, ls = [], [], [], [], []
    for lam, parity, k, vI, zI in found:
        p = zI @ vI
        alpha = (np.dot(zI, zI) / (p * p * np.dot(vI, vI))) ** 0.25
        vI = vI * alpha
        zI = zI / (alpha * p)
        if vI[np.argmax(np.abs(vI))] < 0:
            vI, zI = -vI, -zI
        v = np.empty(size)
        z = np.empty(size)
        v[1:-1], z[1:-1] = vI, zI
        v[[0, -1]] = S @ vI
        z[[0, -1]] = Sz @ zI
        theta = math.acos(min(1.0, max(-1.0, 1.0 + lam / 2.0)))
        scale = 2 * a + 1 if k > 2 * (n - a - 1) else 2 * (n - a)
        ks.append(k); lams.append(lam); Vs.append(v); Zs.append(z)
        ls.append(theta * scale / math.pi)
    return EigenSystem(n, a, op.cos_ell, ks, ls, lams, np.array(Vs), np.array(Zs), "numeric")


def verify_transition_identity(es: EigenSystem, op: PatchOperator, A: BoundaryMatrix | None = None) -> float:
    """Max-norm of ``sum_k v_k z_k^T - (B + A)``."""
    es.require_complete()
    if A is None:
        A = assemble_boundary_matrix(op)
    T0 = es.V.T @ es.Z
    return float(np.max(np.abs(T0 - (op.B + A.A))))
