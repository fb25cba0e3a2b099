"""Exception hierarchy shared by every module."""


class TransitiveError(ValueError):
    """Base class for all errors raised by the toolkit."""


class SpecParseError(TransitiveError):
    """A FunctionSpec string could not be parsed."""


class CapExceededError(TransitiveError):
    """An arity is over the cap of a dense representation or a measure."""


class CodecError(TransitiveError):
    """A strict decoder was handed a malformed code."""


class SchemeError(TransitiveError):
    """Unsupported encoding scheme or construction parameters."""


class ConvergenceError(TransitiveError):
    """An iterative method ran out of iterations."""


class LinearProgramError(TransitiveError):
    """The approximate-degree LP failed numerically."""

    def __init__(self, degree, message):
        super().__init__(f"LP failed at degree {degree}: {message}")
        self.degree = degree


class GroupError(TransitiveError):
    """A generator or a generator word violated its contract."""


class BuilderError(TransitiveError):
    """Dimensions too small to place a certified instance."""


class CertificateError(TransitiveError):
    """A certificate collection is not an unambiguous 1-certificate cover."""
