"""Exception hierarchy shared by the library and the command line."""


class GarsideError(Exception):
    """Base class; ``kind`` is the machine-readable tag used by the CLI."""

    kind = "error"


class UsageError(GarsideError, ValueError):
    kind = "usage"


class CapacityError(GarsideError):
    kind = "capacity"


class DomainError(GarsideError, ValueError):
    kind = "domain"


class NeedsMoreTermsError(GarsideError):
    kind = "needs_more_terms"


class ParseError(GarsideError, ValueError):
    kind = "parse"

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationFailure(GarsideError):
    """Raised when a structure violates a Garside axiom.

    ``axiom`` names the failed check, ``witnesses`` holds offending simples.
    """

    kind = "validation"

    def __init__(self, axiom: str, witnesses=()):
        super().__init__(f"{axiom}: witnesses {list(witnesses)[:8]}")
        self.axiom = axiom
        self.witnesses = list(witnesses)
