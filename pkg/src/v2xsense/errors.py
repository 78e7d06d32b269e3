"""Exception types shared across the workbench."""


class V2xError(Exception):
    """Base class for workbench errors."""


class FcdParseError(V2xError):
    """Raised when an FCD document is not well-formed XML. Carries the line number."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class FcdSchemaError(V2xError):
    """Raised when an FCD document is valid XML but violates the expected schema."""


class ContainerError(V2xError):
    """Raised on malformed binary containers (bad magic, truncation, bad header)."""


class WeightsVersionError(ContainerError):
    """Weights file declares an unsupported format version."""


class WeightsShapeError(ContainerError):
    """A tensor's shape disagrees with the declared architecture."""


class WeightsValueError(ContainerError):
    """A tensor contains non-finite values."""


class NormalizationError(V2xError):
    """A sample that must be normalized is not."""
