"""Patch and lattice geometry shared by every other module.

All analysis works with the dimensionless sub-patch index ``j``; the
microscale spacing ``h`` is carried only so macroscale lengths can be
reported.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction

from .errors import GeometryError

__all__ = ["PatchGeometry", "make_geometry", "WeakBufferWarning"]


class WeakBufferWarning(UserWarning):
    """Buffer of width one: the core is barely shielded from the edges."""


@dataclass(frozen=True)
class PatchGeometry:
    n: int
    a: int
    N: int
    h: float = 1.0

    def __post_init__(self):
        for name in ("n", "a", "N"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value:
                raise GeometryError("integer", f"{name}={value!r} must be an integer")
            object.__setattr__(self, name, int(value))
        if not self.h > 0:
            raise GeometryError("h>0", f"microscale spacing h={self.h} must be positive")
        if self.n < 1:
            raise GeometryError("n>=1", f"patch half-width n={self.n} must be at least 1")
        if not 0 <= self.a < self.n:
            raise GeometryError("0<=a<n", f"core half-width a={self.a} not in [0, n={self.n})")
        if self.N < 1 or 2 * self.n >= self.N:
            raise GeometryError(
                "n/N<1/2", f"patches overlap: n/N = {self.n}/{self.N} is not below 1/2"
            )

    @property
    def H(self) -> float:
        return self.N * self.h

    @property
    def buffer(self) -> int:
        """Reduced half-width ``n - a``."""
        return self.n - self.a

    @property
    def r(self) -> float:
        return (self.n - self.a) / self.N

    @property
    def r_exact(self) -> Fraction:
        return Fraction(self.n - self.a, self.N)

    @property
    def size(self) -> int:
        return 2 * self.n + 1

    def index(self, j: int) -> int:
        """Array position of sub-patch index ``j`` in a length ``2n+1`` vector."""
        if abs(j) > self.n:
            raise IndexError(f"sub-patch index {j} outside [-{self.n}, {self.n}]")
        return j + self.n


def make_geometry(n, a, N, h=1.0) -> PatchGeometry:
    """Validated geometry; warns when the buffer is a single point."""
    g = PatchGeometry(n, a, N, h)
    if g.buffer == 1:
        warnings.warn(
            f"n = a + 1 (n={g.n}, a={g.a}) leaves a buffer of width 1; "
            "coupling errors reach the core almost unattenuated",
            WeakBufferWarning,
            stacklevel=2,
        )
    return g
