"""Exception hierarchy shared by every clusterval module."""


class ClusterValError(ValueError):
    """Base class for all data and parameter errors raised by clusterval."""


class CSVParseError(ClusterValError):
    """Raised for malformed CSV input.

    ``row`` counts data rows from 1 (the header is row 0); ``column`` is the
    0-based field index when known.
    """

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class NonNumericCellError(CSVParseError):
    """A feature cell could not be parsed as a finite real number."""


class LabelColumnError(ClusterValError):
    """The requested label column does not exist."""


class NonFiniteError(ClusterValError):
    """Input matrix contains NaN or infinity."""


class DimensionMismatchError(ClusterValError):
    """Matrix width does not match what a fitted model expects."""


class SplitError(ClusterValError):
    """Train/test split parameters are invalid for the dataset."""


class NotSymmetricError(ClusterValError):
    """Eigen-decomposition input is not symmetric within tolerance."""


class InvalidParameterError(ClusterValError):
    """A numeric parameter (k, component count, height, ...) is out of range."""
