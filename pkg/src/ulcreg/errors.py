"""Exception types raised across the package."""


class UlcError(ValueError):
    """Base class for all domain errors raised by ulcreg."""


class DuplicatePoints(UlcError):
    pass


class WrongDimension(UlcError):
    pass


class SplitTie(UlcError):
    pass


class DomainMismatch(UlcError):
    pass


class NonpositiveBandwidth(UlcError):
    pass


class LengthMismatch(UlcError):
    pass


class InvalidBase(UlcError):
    pass


class EmptyGrid(UlcError):
    pass


class InsufficientCopies(UlcError):
    pass


class UnsupportedGeometry(UlcError):
    pass


class InvalidOrder(UlcError):
    pass


class PreconditionViolated(UlcError):
    pass


class NoRoot(UlcError):
    pass


class ZeroWindow(UlcError):
    pass


class RejectionStall(UlcError):
    pass


class EmptyFold(UlcError):
    pass


class MissingColumn(UlcError):
    pass


class MalformedRow(UlcError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")

    def __reduce__(self):
        return (type(self), (self.line, self.reason))


class EmptyDataset(UlcError):
    pass


class CopyError(UlcError):
    """Wraps a failure inside one copy of a functional panel."""

    def __init__(self, index: int, cause: Exception):
        self.index = index
        self.cause = cause
        super().__init__(f"copy {index}: {cause}")

    def __reduce__(self):
        return (type(self), (self.index, self.cause))


class RunError(UlcError):
    """Wraps a failure inside one benchmark run."""

    def __init__(self, run: int, cause: Exception):
        self.run = run
        self.cause = cause
        super().__init__(f"run {run}: {cause}")

    def __reduce__(self):
        return (type(self), (self.run, self.cause))
