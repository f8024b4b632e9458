class SecselectError(Exception):
    """Base class for all package errors."""


class StructuralError(SecselectError, ValueError):
    """Shapes or arities do not line up (class vs lattice, obs vs network)."""


class ConfigurationError(SecselectError, ValueError):
    pass


class EvaluationError(SecselectError, TypeError):
    """A constraint could not be evaluated, e.g. ordering a text value."""


class ParseError(SecselectError, ValueError):
    pass


class ValidationError(SecselectError, ValueError):
    pass


class IngestionError(SecselectError, ValueError):
    pass


class ContractViolation(SecselectError, RuntimeError):
    """A caller broke a precondition (acting on a finished episode, empty buffer...)."""


class CheckpointError(SecselectError, ValueError):
    pass
