"""Exception types shared across the package."""


class EverettropyError(Exception):
    """Base class for all package errors."""


class ValidationError(EverettropyError, ValueError):
    """Input violates a precondition.

    ``field`` names the offending argument or file key so the CLI can print a
    one-line diagnostic.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field

    def __str__(self):
        msg = super().__str__()
        if self.field:
            return f"{self.field}: {msg}"
        return msg


class PropertyViolation(EverettropyError):
    """A numerical invariant (e.g. entropy monotonicity) failed beyond tolerance."""
