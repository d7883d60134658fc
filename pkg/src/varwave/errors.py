"""Exception types shared across the package."""


class VarwaveError(Exception):
    """Base class for all package errors."""


class CoefficientDomainError(VarwaveError):
    """Coefficient field evaluated outside its admissible range (alpha or gamma <= 0)."""


class ConfigError(VarwaveError):
    """Bad run configuration or config file."""


class NoConvergence(VarwaveError):
    """Cell fixed-point iteration failed to reach tolerance.

    Carries the lattice index of the offending node and the last residual.
    """

    def __init__(self, i, j, residual, iterations):
        self.i = i
        self.j = j
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"cell ({i}, {j}) did not converge: residual {residual:.3e} "
            f"after {iterations} iterations (reduce h near steep gradients)"
        )


class DomainExit(VarwaveError):
    """Integration produced t < 0; marching left the forward-time region."""


class OutOfDomain(VarwaveError):
    """Query point lies outside the computed region."""


class EmptyLevelSet(VarwaveError):
    """Requested time level does not intersect the computed grid."""


class InsufficientSamples(VarwaveError):
    """Not enough samples along the requested line for a regression fit."""


class ProviderGap(VarwaveError):
    """Solution-field provider cannot supply data at the requested time."""


class MismatchedStart(VarwaveError):
    """Traced path does not start on a lattice coordinate line."""


class CFLViolation(VarwaveError):
    """Explicit step would exceed the stability limit lambda_max*dt/dx <= 0.5."""


class BlowupSuspected(VarwaveError):
    """Finite-difference state exceeded the smoothness cap; gradient blowup likely."""

    def __init__(self, t, value, cap):
        self.t = t
        self.value = value
        self.cap = cap
        super().__init__(f"|R|,|S| reached {value:.3e} > cap {cap:.3e} at t = {t:.6f}")


class WindowMismatch(VarwaveError):
    """Requested comparison times are not covered by both solutions."""


class MissingArtifacts(VarwaveError):
    """Run directory lacks the artifacts needed for the requested projection."""
