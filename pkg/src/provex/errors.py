"""Exception types shared across the package."""


class ProvexError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(ProvexError):
    """Shapes or lengths of operands do not agree."""


class ValidationError(ProvexError):
    """An input value violates a documented precondition."""


class SchemaError(ValidationError):
    """A serialized document does not match the expected schema.

    Carries the path of the offending field so callers can report it.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
