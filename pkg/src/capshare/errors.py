"""Exception types shared across the package."""


class CapshareError(Exception):
    """Base class for all errors raised by capshare."""


class DomainError(CapshareError, ValueError):
    """Numeric argument outside the domain of a special function."""


class Violation:
    """One failed invariant found while validating a configuration."""

    __slots__ = ("code", "message")

    def __init__(self, code, message):
        self.code = code
        self.message = message

    def __repr__(self):
        return f"Violation({self.code!r}, {self.message!r})"

    def __eq__(self, other):
        return isinstance(other, Violation) and (self.code, self.message) == (other.code, other.message)

    def __hash__(self):
        return hash((self.code, self.message))


class ValidationError(CapshareError, ValueError):
    """Configuration violates one or more invariants.

    ``violations`` holds every problem found, not only the first.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(f"{v.code}: {v.message}" for v in self.violations))

    @property
    def codes(self):
        return [v.code for v in self.violations]


class InvalidScv(ValidationError):
    def __init__(self, scv):
        super().__init__([Violation("InvalidScv", f"squared coefficient of variation must be >= 1, got {scv}")])


class UnsupportedDistribution(CapshareError):
    pass


class StateSpaceTooLarge(CapshareError):
    pass


class SingularSystem(CapshareError):
    pass


class InvalidParameters(CapshareError, ValueError):
    pass


class ParseError(CapshareError):
    """Config file could not be parsed; ``field``/``line``/``column`` locate the problem when known."""

    def __init__(self, message, *, field=None, line=None, column=None):
        self.field = field
        self.line = line
        self.column = column
        where = []
        if field is not None:
            where.append(f"field {field!r}")
        if line is not None:
            where.append(f"line {line}, column {column}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class StageError(CapshareError):
    """Failure inside one stage (``approx``, ``exact`` or ``sim``) of an analysis."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
