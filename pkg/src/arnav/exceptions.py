"""Exception hierarchy.

Every error raised by the toolkit derives from :class:`ArnavError`.  The three
intermediate classes map onto the CLI exit codes: validation failures (1),
parse errors (2) and numerical failures (3).
"""


class ArnavError(Exception):
    exit_code = 1


class ValidationError(ArnavError, ValueError):
    exit_code = 1


class NumericalError(ArnavError, ArithmeticError):
    exit_code = 3


class ParseError(ArnavError, ValueError):
    """Malformed input file.

    ``line`` and ``column`` are 1-based; either may be ``None`` when the
    problem is not tied to a position (e.g. an empty file).
    """

    exit_code = 2

    def __init__(self, reason, line=None, column=None):
        self.reason = reason
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(f"{where}{reason}")


class NonMonotonicFrames(ParseError):
    pass


class SchemaError(ValidationError):
    """Config does not match its schema; ``path`` is a JSON pointer."""

    def __init__(self, path, reason):
        self.path = path
        self.reason = reason
        super().__init__(f"{path or '/'}: {reason}")


class DegenerateInput(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class DegenerateConfiguration(NumericalError):
    pass


class DegenerateVariance(NumericalError):
    pass


class InsufficientCorrespondence(ValidationError):
    pass


class NonStaticPhantom(ValidationError):
    pass


class InsufficientFrames(ValidationError):
    pass


class EmptyWindow(ValidationError):
    pass


class InsufficientMeasurements(ValidationError):
    pass


class MixedExperimentKinds(ValidationError):
    pass


class UnorderedEvents(ValidationError):
    pass
