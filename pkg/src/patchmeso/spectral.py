"""Closed-form eigen-system of the single-patch operator.

Modes ``k = 0 .. 2(n-a-1)`` behave like diffusion on a patch of reduced
half-width ``n - a``; the remaining ``2a`` modes live on the core scale
``2a + 1`` and come in equal-eigenvalue pairs of opposite parity.
Eigenvectors are stored over ``j = -n .. n`` (array position ``j + n``).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSpectrumError, IncompleteBasisError
from .geometry import PatchGeometry

__all__ = [
    "Mode",
    "EigenSystem",
    "analytic_eigensystem",
    "detect_degeneracy",
    "check_biorthonormality",
    "mass_matrix",
    "align_modes",
    "compare_eigensystems",
    "write_modes_csv",
]

# |denominator| below this in the left-vector corrections means a degenerate
# pair slipped past detect_degeneracy.
_GUARD = 1e-12


@dataclass(frozen=True)
class Mode:
    k: int
    l: float
    lam: float
    v: np.ndarray
    z: np.ndarray


@dataclass
class EigenSystem:
    """Eigenvalues ``lam``, right vectors ``V`` and left vectors ``Z`` (rows)."""

    n: int
    a: int
    cos_ell: float
    k: np.ndarray
    l: np.ndarray
    lam: np.ndarray
    V: np.ndarray
    Z: np.ndarray
    source: str = "analytic"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.k = np.asarray(self.k, dtype=int)
        self.l = np.asarray(self.l, dtype=float)
        self.lam = np.asarray(self.lam, dtype=float)
        self.V = np.asarray(self.V, dtype=float)
        self.Z = np.asarray(self.Z, dtype=float)

    @property
    def ell(self) -> float:
        return math.acos(self.cos_ell)

    @property
    def size(self) -> int:
        return 2 * self.n + 1

    @property
    def n_modes(self) -> int:
        return len(self.lam)

    @property
    def complete(self) -> bool:
        return self.n_modes == 2 * self.n - 1

    @property
    def parity(self) -> np.ndarray:
        """0 for modes even in ``j``, 1 for odd."""
        return self.k % 2

    @property
    def modes(self) -> list[Mode]:
        return [
            Mode(int(k), float(l), float(lam), v, z)
            for k, l, lam, v, z in zip(self.k, self.l, self.lam, self.V, self.Z)
        ]

    def mode(self, k: int) -> Mode:
        (idx,) = np.flatnonzero(self.k == k)
        return self.modes[idx]

    def sorted_by_k(self) -> "EigenSystem":
        order = np.argsort(self.k, kind="stable")
        return EigenSystem(
            self.n, self.a, self.cos_ell, self.k[order], self.l[order],
            self.lam[order], self.V[order], self.Z[order], self.source, dict(self.meta),
        )

    def require_complete(self):
        if not self.complete:
            raise IncompleteBasisError(
                f"{self.n_modes} modes supplied, a complete basis needs {2 * self.n - 1}"
            )


def mass_matrix(n: int) -> np.ndarray:
    """``B = diag(0, 1, ..., 1, 0)`` of size ``2n+1``."""
    d = np.ones(2 * n + 1)
    d[0] = d[-1] = 0.0
    return np.diag(d)


def _family1_wavenumber(k: int, ell: float) -> float:
    if k % 2:
        return float(k + 1)
    return k + 1 + (-1) ** (k // 2) * (2 * ell / math.pi - 1)


def detect_degeneracy(g: PatchGeometry, cos_ell: float | None = None) -> list[tuple[int, int]]:
    """Odd mode pairs ``(k1, k2)`` whose eigenvalues coincide.

    ``k1`` runs over the reduced-patch modes and ``k2`` over the core-scale
    modes; the coincidence condition ``(k1+1)(2a+1) = 2(n-a)(m+1)`` is
    checked in exact integer arithmetic so ``cos_ell`` does not enter.
    """
    n, a = g.n, g.a
    d = n - a
    pairs = []
    for m in range(1, 2 * a, 2):
        for k1 in range(1, 2 * (d - 1), 2):
            if (k1 + 1) * (2 * a + 1) == 2 * d * (m + 1):
                pairs.append((k1, m + 2 * (d - 1)))
    return sorted(pairs)


def _even_collision(n, a, ell, m):
    """Reduced-patch even mode sharing the eigenvalue of core mode ``m``."""
    d = n - a
    theta = (2 * math.ceil(m / 2)) * math.pi / (2 * a + 1)
    for k1 in range(0, 2 * (d - 1) + 1, 2):
        th1 = _family1_wavenumber(k1, ell) * math.pi / (2 * d)
        if abs(math.cos(th1) - math.cos(theta)) < 1e-9:
            return k1
    return -1


def _corrections(n, a, w, odd, cos_ell):
    """Left-vector corrections built from ``w_i`` (``i = 0..a``) over ``j = -n..n``.

    Each edge adds a tent of ``w`` over its action region; when ``2a > n`` the
    two regions cross the centre and both tents apply.
    """
    out = np.zeros(2 * n + 1)
    lo = n - 2 * a
    for j in range(-(n - 1), n):
        c = 0.0
        if not odd and abs(j) <= a:
            c += -2.0 * cos_ell * w[a - abs(j)]
        if lo <= j <= n - 1:
            c += w[min(j - lo, n - j)]
        if lo <= -j <= n - 1:
            c += -w[min(-j - lo, n + j)] if odd else w[min(-j - lo, n + j)]
        out[j + n] = c
    return out


def analytic_eigensystem(g: PatchGeometry, cos_ell: float) -> EigenSystem:
    """All ``2n - 1`` modes from the closed-form expressions.

    Raises DegenerateSpectrumError when two modes share an eigenvalue with
    dependent eigenvectors.
    """
    if not 0.0 < cos_ell <= 1.0:
        raise ValueError(f"cos_ell={cos_ell} outside (0, 1]")
    n, a = g.n, g.a
    pairs = detect_degeneracy(g, cos_ell)
    if pairs:
        raise DegenerateSpectrumError(pairs)
    ell = math.acos(cos_ell)
    sin_ell = math.sin(ell)
    d = n - a
    c = 2 * a + 1
    js = np.arange(-n, n + 1)
    iw = np.arange(a + 1)

    ks, ls, lams, Vs, Zs = [], [], [], [], []

    for k in range(2 * (d - 1) + 1):
        odd = k % 2 == 1
        l = _family1_wavenumber(k, ell)
        theta = l * math.pi / (2 * d)
        lam = -2.0 * (1.0 - math.cos(theta))
        norm = d ** -0.5 if odd else (d * sin_ell) ** -0.5
        v = norm * (np.sin(js * theta) if odd else np.cos(js * theta))

        denom = 2.0 * math.sin(c * l * math.pi / (4 * d))
        if abs(denom) < _GUARD:
            raise DegenerateSpectrumError(
                [(k, -1)], f"mode k={k}: reduced-patch correction undefined (degenerate)"
            )
        q = l * math.pi / (4 * d)
        w = (-1) ** math.ceil((k - 1) / 2) / denom * (math.cos(q) - np.cos((2 * iw + 1) * q)) * norm

        zp = np.zeros(2 * n + 1)
        inside = np.abs(js) <= d
        if odd:
            zp[inside] = norm * np.sin(js[inside] * theta)
        else:
            zp[inside] = norm * np.sin(ell - (-1) ** (k // 2) * np.abs(js[inside]) * theta)
        z = zp + _corrections(n, a, w, odd, cos_ell)
        z[0], z[-1] = z[1], z[-2]

        ks.append(k); ls.append(l); lams.append(lam); Vs.append(v); Zs.append(z)

    for m in range(1, 2 * a + 1):
        k = m + 2 * (d - 1)
        odd = k % 2 == 1
        l = float(2 * math.ceil(m / 2))
        theta = l * math.pi / c
        lam = -2.0 * (1.0 - math.cos(theta))
        v = c ** -0.5 * (np.sin(js * theta) if odd else np.cos(js * theta))

        if m % 2:
            denom = math.sin(d * theta)
        else:
            denom = math.cos(d * theta) - cos_ell
        if abs(denom) < _GUARD:
            partner = _even_collision(n, a, ell, m) if m % 2 == 0 else -1
            raise DegenerateSpectrumError(
                [(partner, k)], f"core mode k={k} coincides with mode {partner} (degenerate)"
            )
        q = l * math.pi / (2 * c)
        sign = (-1) ** math.ceil((m - 2) / 2)
        w = sign * (math.cos(q) - np.cos((2 * iw + 1) * q)) * c ** -0.5 / denom

        z = _corrections(n, a, w, odd, cos_ell)
        z[0], z[-1] = z[1], z[-2]

        ks.append(k); ls.append(l); lams.append(lam); Vs.append(v); Zs.append(z)

    return EigenSystem(n, a, float(cos_ell), ks, ls, lams, np.array(Vs), np.array(Zs), "analytic")


def check_biorthonormality(es: EigenSystem, B: np.ndarray | None = None) -> float:
    """``max |z_k^T B v_k' - delta_kk'|``."""
    if B is None:
        B = mass_matrix(es.n)
    G = es.Z @ B @ es.V.T
    return float(np.max(np.abs(G - np.eye(len(G)))))


def align_modes(ref: EigenSystem, other: EigenSystem) -> EigenSystem:
    """Rescale ``other``'s modes onto ``ref``'s convention, matched by ``k``.

    Biorthonormality fixes each ``(v_k, z_k)`` pair only up to
    ``v -> s v, z -> z / s``; ``s`` is chosen by least squares on ``v``.
    """
    a = ref.sorted_by_k()
    b = other.sorted_by_k()
    if not np.array_equal(a.k, b.k):
        raise ValueError("eigensystems carry different mode labels")
    s = np.einsum("ij,ij->i", a.V, b.V) / np.einsum("ij,ij->i", b.V, b.V)
    return EigenSystem(
        b.n, b.a, b.cos_ell, b.k, b.l, b.lam, b.V * s[:, None], b.Z / s[:, None], b.source
    )


def compare_eigensystems(ref: EigenSystem, other: EigenSystem) -> tuple[float, float]:
    """Max eigenvalue difference and max eigenvector difference after alignment.

    Vector differences are taken per mode relative to the max-norm of the
    reference vector. Left vectors of nearly coincident pairs reach entries
    in the hundreds and their scale is tied to ``v`` through a sum with heavy
    cancellation, so absolute entry differences would measure conditioning
    rather than agreement.
    """
    a = ref.sorted_by_k()
    b = align_modes(ref, other)
    lam_err = float(np.max(np.abs(a.lam - b.lam)))

    def rel(x, y):
        return np.max(np.abs(x - y), axis=1) / np.max(np.abs(x), axis=1)

    vec_err = float(max(np.max(rel(a.V, b.V)), np.max(rel(a.Z, b.Z))))
    return lam_err, vec_err


def write_modes_csv(es: EigenSystem, fh) -> None:
    """One row per ``(k, j)``: ``k, l_k, lambda_k, j, v, z``."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["k", "l_k", "lambda_k", "j", "v", "z"])
    s = es.sorted_by_k()
    for k, l, lam, v, z in zip(s.k, s.l, s.lam, s.V, s.Z):
        for j in range(-s.n, s.n + 1):
            w.writerow([int(k), repr(float(l)), repr(float(lam)), j,
                        repr(float(v[j + s.n])), repr(float(z[j + s.n]))])
