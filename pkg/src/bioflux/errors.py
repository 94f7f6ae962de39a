"""Exception hierarchy shared by all bioflux modules."""


class BiofluxError(Exception):
    """Base class for every error raised by the package."""


class InvalidParameter(BiofluxError, ValueError):
    pass


class DomainError(BiofluxError, ValueError):
    """A field left its admissible range (e.g. a negative density)."""


class RangeError(BiofluxError, ValueError):
    """A tabulated nonlinearity was evaluated outside its sampled range."""


class HypothesisError(BiofluxError):
    """A growth/sensitivity hypothesis required by the configured regime failed."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SolverError(BiofluxError):
    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class CompatibilityError(BiofluxError):
    """Right-hand side of a pure Neumann problem has nonzero mean."""


class CFLViolation(BiofluxError):
    """An explicit update produced a negative density: the step was too large."""


class SnapshotFormatError(BiofluxError):
    pass


class UnsupportedVersion(SnapshotFormatError):
    pass


class ConfigError(BiofluxError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InsufficientHorizon(BiofluxError):
    pass
