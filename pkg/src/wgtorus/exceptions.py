"""Exception hierarchy for the quasimode pipeline."""


class WGError(Exception):
    """Base class for all errors raised by :mod:`wgtorus`."""


class DomainError(WGError, ValueError):
    """An argument lies outside the domain of the operation."""


class UnsupportedOrderError(DomainError):
    """Parabolic cylinder order that is negative or non-integer."""


class CurveNotClosedError(WGError):
    """The curve built from a curvature profile does not close up."""


class OutOfChartError(WGError):
    """A point lies outside the region where the (r, s) chart is valid."""


class GeometryError(WGError):
    """Geometric assumption violated (ray never hits the wall, bad local shape)."""


class RegimeError(WGError):
    """The spectral problem is not in a regime this package handles."""


class StabilityError(WGError):
    """The stability function argument is non-positive somewhere it is needed."""

    def __init__(self, message, s=None):
        super().__init__(message)
        self.s = s


class NoModeError(WGError):
    """The quantization condition has no root in the search bracket."""


class QuantizationMismatchError(WGError):
    """The WKB mode is not periodic to the required tolerance."""


class CollarTooWideError(WGError):
    """Reflected extension nodes leave the classically allowed interval."""


class LocalizationError(WGError):
    """The cutoff changed the L2 norm of the mode by more than allowed."""


class OracleError(WGError):
    """The finite-difference eigenvalue oracle failed to converge."""


class AuditError(WGError):
    """A normalization or orthogonality audit failed."""

    def __init__(self, check, message):
        super().__init__(f"{check}: {message}")
        self.check = check


class ConfigError(WGError):
    """Malformed or inconsistent run configuration."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class IntegrationError(WGError):
    """Time stepping could not meet its energy tolerance after all step halvings."""


class GrazingWarning(UserWarning):
    """A billiard ray meets the wall almost tangentially."""
