"""Exception hierarchy shared across the package."""


class ShopsimError(Exception):
    """Base class for all package errors."""


class SchemaError(ShopsimError):
    """An input document violates the documented schema.

    Carries enough context to name the offending record and field.
    """

    def __init__(self, message: str, *, record: str | None = None,
                 field: str | None = None) -> None:
        super().__init__(message)
        self.record = record
        self.field = field


class CatalogValidationError(ShopsimError):
    """Loaded data violates a cross-record invariant (duplicates, dangling refs)."""


class ConfigurationError(ShopsimError):
    """Bad or missing configuration; never retried."""


class TransportError(ShopsimError):
    """A network-level failure after exhausting retries. Retriable by the caller."""


class JudgeParseError(ShopsimError):
    """The judge backend returned a verdict with no parseable score."""


class TrainingError(ShopsimError):
    """Classifier training cannot proceed (degenerate or insufficient corpora)."""
