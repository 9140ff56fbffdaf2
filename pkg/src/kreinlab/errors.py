"""Exception hierarchy shared by all kreinlab modules."""


class KreinLabError(Exception):
    """Base class for every error raised by the library."""


class ExprSyntaxError(KreinLabError, SyntaxError):
    """Malformed coefficient expression.

    ``position`` is the 0-based offset of the offending character and
    ``expected`` the set of tokens that would have been accepted there.
    """

    def __init__(self, message, source, position, expected=()):
        self.source = source
        self.position = position
        self.expected = frozenset(expected)
        detail = message
        if self.expected:
            detail += " (expected one of: %s)" % ", ".join(sorted(self.expected))
        super().__init__("%s at offset %d in %r" % (detail, position, source))
        # SyntaxError keeps its own offset attribute; keep it 0-based like ``position``
        self.offset = position


class DomainError(KreinLabError, ArithmeticError):
    """Expression evaluated outside its real domain."""

    def __init__(self, message, x=None):
        self.x = x
        if x is not None:
            message = "%s (at x=%r)" % (message, x)
        super().__init__(message)


class ValidationError(KreinLabError, ValueError):
    def __init__(self, message, witnesses=()):
        self.witnesses = list(witnesses)
        super().__init__(message)


class NonConvergent(KreinLabError):
    """A limit along the truncation sequence did not settle."""


class Inconclusive(KreinLabError):
    """A numerical test could not reach a verdict within its budget."""

    def __init__(self, message, evidence=None):
        self.evidence = evidence
        super().__init__(message)


class StepFailure(KreinLabError):
    def __init__(self, message, closest_x):
        self.closest_x = closest_x
        super().__init__("%s (closest approach x=%r)" % (message, closest_x))


class IntegrationOverflow(KreinLabError, OverflowError):
    pass


class OscillatoryError(KreinLabError):
    pass


class InequalityViolation(KreinLabError):
    def __init__(self, message, witnesses=()):
        self.witnesses = list(witnesses)
        super().__init__(message)


class KernelAtA(KreinLabError):
    """The kernel element vanishes at the regular endpoint."""


class NotLimitPoint(KreinLabError):
    pass


class SingularCoefficientMatrix(KreinLabError):
    pass


class NonCoerciveParameter(KreinLabError, ValueError):
    pass


class UnsupportedCase(KreinLabError):
    pass


class WindowExhausted(KreinLabError):
    pass


class TruncationUnconverged(KreinLabError):
    pass


class WindingMismatch(KreinLabError):
    pass


class NotAnEigenvalue(KreinLabError):
    pass


class DecompositionError(KreinLabError):
    pass
