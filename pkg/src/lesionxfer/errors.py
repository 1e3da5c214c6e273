"""Exception hierarchy shared by the library and the command line."""


class LesionError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1


class ConfigError(LesionError, ValueError):
    exit_code = 1


class DataError(LesionError, ValueError):
    exit_code = 2


class ParseError(DataError):
    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class ConsistencyError(DataError):
    pass


class FormatError(DataError):
    """Malformed weights / tensor file."""


class ShapeError(LesionError, ValueError):
    exit_code = 2


class NumericError(LesionError, ArithmeticError):
    exit_code = 3
