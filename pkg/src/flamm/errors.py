"""Exception hierarchy shared by every module.

Each class carries the CLI exit code it maps to, so the command-line layer
never has to guess.
"""


class FlammError(Exception):
    exit_code = 2


class InvalidInputError(FlammError, ValueError):
    """Shapes, values or arguments that violate an operation's contract."""


class ParseError(InvalidInputError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class DegenerateLabelsError(InvalidInputError):
    pass


class DegenerateFeatureError(InvalidInputError):
    pass


class NumericalError(FlammError, ArithmeticError):
    """A factorization or decomposition failed even after regularization."""

    exit_code = 3

    def __init__(self, message, condition=None, layer=None):
        self.condition = condition
        self.layer = layer
        super().__init__(message)
