"""Exception types shared across the package."""


class RingviewError(Exception):
    """Base class for all errors raised by this package."""


class RingMismatchError(RingviewError):
    """Operands do not belong to the same ring."""


class UnknownAttributeError(RingviewError):
    """An attribute name is not tracked by the ring or schema."""


class KindMismatchError(RingviewError):
    """A value's kind does not match the attribute's declared kind."""


class SchemaError(RingviewError):
    """A key or row does not conform to the owning schema."""


class CsvParseError(RingviewError):
    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class UpdateStreamError(RingviewError):
    def __init__(self, line_no, message):
        super().__init__(f"update stream line {line_no}: {message}")
        self.line_no = line_no


class TreeValidationError(RingviewError):
    """The view tree violates a structural condition."""


class ConfigError(RingviewError):
    """The engine configuration is invalid."""


class NoDataError(RingviewError):
    """An analytics routine needs a non-empty aggregate."""


class DataIntegrityError(RingviewError):
    """Maintained aggregates are mutually inconsistent."""


class DivergedError(RingviewError):
    """Gradient descent diverged; try a smaller step."""


class SteerRejectedError(RingviewError):
    """A steering command was rejected; the message names the reason."""
