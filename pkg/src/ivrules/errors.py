"""Exception hierarchy shared by every module."""


class IVRulesError(Exception):
    """Base class for all package errors."""


class ValidationError(IVRulesError, ValueError):
    """Invalid model, regime or dataset. ``path`` points at the offending field."""

    def __init__(self, message, path=None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class DataFormatError(ValidationError):
    """Malformed dataset file. ``line`` is 1-based and includes the header."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message, path=path)


class DomainError(DataFormatError):
    """A parsed field lies outside its allowed domain (e.g. z not in {-1, 1})."""


class EmptyDatasetError(ValidationError):
    pass


class NonBinaryOutcome(ValidationError):
    pass


class InvalidPerturbation(ValidationError):
    pass


class NumericalError(IVRulesError):
    """Failures of the numerical routines rather than of the inputs."""


class WeakInstrument(NumericalError):
    def __init__(self, message, cells=()):
        self.cells = tuple(cells)
        super().__init__(message)


class MissingArm(NumericalError):
    def __init__(self, message, cells=()):
        self.cells = tuple(cells)
        super().__init__(message)


class Infeasible(NumericalError):
    pass


class Unbounded(NumericalError):
    pass
