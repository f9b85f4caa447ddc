"""Exception hierarchy shared across the engine.

Exit-code mapping used by the CLI: validation/parameter/schema problems
exit 2, infeasible perturbation specs exit 3, I/O failures exit 4.
"""


class ConcordError(Exception):
    """Base class for all engine errors."""


class ValidationError(ConcordError):
    """Input data violates a documented contract."""


class DimensionError(ValidationError):
    """Array shapes do not match the declared spaces."""


class ParameterError(ConcordError):
    """A numeric or structural parameter is outside its documented range."""


class ConfigurationError(ConcordError):
    """A run configuration is internally inconsistent or incomplete."""


class SchemaError(ConfigurationError):
    """A JSON document does not match its declared schema.

    Messages carry a JSON pointer to the offending field ("/reward/noise").
    """


class FeasibilityError(ConcordError):
    """A perturbation spec violates the tube feasibility inequality."""


class StateError(ConcordError):
    """An operation was invoked on an object in the wrong state."""


class TableLookupError(ConcordError):
    """A table-backed model was queried on a key it has never seen."""
