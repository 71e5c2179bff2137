class ParamsMismatch(ValueError):
    """Raised when objects built over different groups are combined."""


class BudgetExceeded(RuntimeError):
    """A configurable size budget was hit; results would be truncated."""


class MissingWord(KeyError):
    """A trace assignment does not cover a word that is needed."""


class VerificationFailed(RuntimeError):
    """An emitted bound or certificate failed its exact re-check."""
