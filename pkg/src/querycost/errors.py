"""Exception hierarchy shared across the package.

Errors that stem from bad or insufficient input data derive from
:class:`DataError`; the CLI maps them to exit code 2.
"""


class QueryCostError(Exception):
    """Base class for all package errors."""


class DataError(QueryCostError):
    pass


class ParseError(DataError):
    """A log line could not be turned into a record."""

    def __init__(self, field, message=None):
        self.field = field
        super().__init__(message or f"{type(self).__name__}({field!r})")


class MissingField(ParseError):
    pass


class TypeMismatch(ParseError):
    pass


class InvalidDatehour(ParseError):
    pass


class EmptyDataset(DataError):
    pass


class InsufficientData(DataError):
    pass


class DegenerateData(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class EmptyVocabulary(DataError):
    pass


class MissingIdf(QueryCostError):
    pass


class ZeroVariance(DataError):
    pass


class InsufficientPoints(DataError):
    pass


class EmptyWindow(DataError):
    pass


class NoTemplateForClassPair(DataError):
    pass


class NoCluster(QueryCostError):
    pass


class NotFound(QueryCostError):
    pass


class CorruptBundle(QueryCostError):
    pass


class InvariantViolation(QueryCostError):
    pass


class StartupError(QueryCostError):
    pass
