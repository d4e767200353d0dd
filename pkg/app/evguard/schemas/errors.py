"""Error codes and exception hierarchy shared by every testbed module."""


# Common error codes
class ErrorCode:
    """Standard error codes."""

    # Configuration / validation errors
    VALIDATION_ERROR = "VALIDATION_ERROR"
    CONFIG_ERROR = "CONFIG_ERROR"

    # Dataset format errors
    LAYOUT_MISMATCH = "LAYOUT_MISMATCH"
    INVALID_CELL = "INVALID_CELL"
    LABEL_DOMAIN = "LABEL_DOMAIN"

    # Numerical errors
    SHAPE_MISMATCH = "SHAPE_MISMATCH"
    DATA_ERROR = "DATA_ERROR"
    GRID_MISMATCH = "GRID_MISMATCH"

    # Mesh / persistence errors
    SCENARIO_ERROR = "SCENARIO_ERROR"
    SERIALIZATION_ERROR = "SERIALIZATION_ERROR"


class EvguardError(Exception):
    """Base class for domain errors raised by the testbed."""

    error_code = ErrorCode.VALIDATION_ERROR

    def __init__(self, message: str, *, error_code: str | None = None):
        """Initialize the error.

        Args:
            message: Human-readable error message
            error_code: Optional override of the class-level error code

        """
        super().__init__(message)
        self.message = message
        if error_code is not None:
            self.error_code = error_code


class ConfigurationError(EvguardError):
    """Invalid simulation, training, bus or CLI configuration."""

    error_code = ErrorCode.CONFIG_ERROR


class DatasetFormatError(EvguardError):
    """Malformed dataset CSV or layout manifest, located by row/column."""

    error_code = ErrorCode.LAYOUT_MISMATCH

    def __init__(
        self,
        message: str,
        *,
        error_code: str | None = None,
        row: int | None = None,
        column: str | None = None,
    ):
        """Initialize the error with an optional cell location.

        Args:
            message: Human-readable error message
            error_code: Optional override of the class-level error code
            row: 1-based data row (header excluded) where the problem was found
            column: Column name where the problem was found

        """
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column {column}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message, error_code=error_code)
        self.row = row
        self.column = column


class ShapeMismatchError(EvguardError):
    """Tensor or vector with the wrong shape."""

    error_code = ErrorCode.SHAPE_MISMATCH


class DegenerateDataError(EvguardError):
    """Data that cannot support the requested operation (e.g. a class too small)."""

    error_code = ErrorCode.DATA_ERROR


class GridMismatchError(EvguardError):
    """Two traces that were not produced on the same time grid."""

    error_code = ErrorCode.GRID_MISMATCH


class ScenarioError(EvguardError):
    """Malformed attack or mesh scenario."""

    error_code = ErrorCode.SCENARIO_ERROR


class SerializationError(EvguardError):
    """Corrupt or incompatible model container."""

    error_code = ErrorCode.SERIALIZATION_ERROR
