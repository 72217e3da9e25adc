"""Exception types raised across the package."""


class ExplainError(Exception):
    """Base class for all package errors."""


class ValidationError(ExplainError, ValueError):
    """Invalid configuration or argument."""


class DomainError(ValidationError):
    """Argument outside the mathematical domain of a function."""


class ParseError(ExplainError):
    """Malformed input file. ``line`` is 1-based, counting the header."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(ExplainError):
    """A serialized model or shape does not match its schema."""


class DegenerateInputError(ValidationError):
    """Too few or collinear points for a triangulation."""


class LowAcceptanceError(ExplainError):
    """Rejection sampler exhausted its attempt budget."""

    def __init__(self, accepted, attempts, required):
        self.accepted = accepted
        self.attempts = attempts
        self.required = required
        self.acceptance_rate = accepted / attempts if attempts else 0.0
        super().__init__(
            f"accepted {accepted} of {required} required samples after {attempts} attempts "
            f"(acceptance rate {self.acceptance_rate:.4g})"
        )


class EvaluationError(ExplainError):
    """A property function produced a non-finite value."""
