"""Exception types raised across the package."""


class PatchMesoError(Exception):
    """Base class for all package errors."""


class GeometryError(PatchMesoError, ValueError):
    """A patch geometry violates one of its validity rules.

    ``rule`` names the violated rule so callers can report it.
    """

    def __init__(self, rule, message):
        super().__init__(f"{rule}: {message}")
        self.rule = rule


class DegenerateSpectrumError(PatchMesoError, ValueError):
    """Repeated eigenvalues with dependent eigenvectors; no complete basis."""

    def __init__(self, pairs, message=None):
        pairs = [tuple(p) for p in pairs]
        if message is None:
            message = "degenerate spectrum, coinciding modes " + ", ".join(
                f"({p[0]}, {p[1]})" for p in pairs
            )
        super().__init__(message)
        self.pairs = pairs


class IncompleteBasisError(PatchMesoError, ValueError):
    pass


class QuadratureError(PatchMesoError, RuntimeError):
    def __init__(self, achieved, requested):
        super().__init__(
            f"quadrature did not converge: estimated relative error {achieved:.3e} "
            f"exceeds requested {requested:.1e}"
        )
        self.achieved = achieved


class ConstraintError(PatchMesoError, ValueError):
    """Boundary values cannot be recovered from the coupling condition."""


class BlowupError(PatchMesoError, FloatingPointError):
    def __init__(self, t, max_abs):
        super().__init__(f"numerical blow-up at t={t:.6g}: max |u| = {max_abs:.3e}")
        self.t = t


class ConfigError(PatchMesoError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
