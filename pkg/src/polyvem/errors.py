class PolyVEMError(Exception):
    """Base class for all package errors."""


class InvalidGeometryError(PolyVEMError, ValueError):
    pass


class NonconformingMeshError(PolyVEMError, ValueError):
    def __init__(self, message, edge=None):
        super().__init__(message)
        self.edge = edge


class MeshFormatError(PolyVEMError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConditioningError(PolyVEMError, ArithmeticError):
    """Raised when a matrix is numerically singular or a factorization breaks down."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class UnsupportedDegreeError(PolyVEMError, ValueError):
    pass


class FitError(PolyVEMError, ValueError):
    pass
