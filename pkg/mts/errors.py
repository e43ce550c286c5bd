"""
Errors for the MTS Domain Adaptation toolkit
Exception hierarchy shared by the engine, services and CLI controllers
"""


class MtsError(Exception):
    """Base class for every error raised by the toolkit"""

    exit_code = 1


class DimensionError(MtsError):
    """Operand shapes do not conform"""


class DomainError(MtsError):
    """Input outside the mathematical domain of an operation (e.g. log of 0)"""


class ContractError(MtsError):
    """Caller violated a documented precondition"""


class GradCheckError(MtsError):
    """Finite-difference check could not be evaluated at some coordinate"""

    def __init__(self, message, coordinate=None):
        super().__init__(message)
        self.coordinate = coordinate


class UsageError(MtsError):
    """Bad command line usage"""

    exit_code = 1


class ConfigError(MtsError):
    """Run configuration could not be parsed or validated"""

    exit_code = 1

    def __init__(self, message, key=None, line=None):
        location = []
        if key is not None:
            location.append(f"key '{key}'")
        if line is not None:
            location.append(f"line {line}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
        self.key = key
        self.line = line


class DataError(MtsError):
    """Dataset, checkpoint or other input file is missing or invalid"""

    exit_code = 2


class ParseError(DataError):
    """A file row could not be parsed"""

    def __init__(self, message, path=None, line=None):
        if line is not None:
            message = f"{path or '<input>'}:{line}: {message}"
        super().__init__(message)
        self.path = path
        self.line = line


class NumericalAbort(MtsError):
    """Training produced a non-finite loss"""

    exit_code = 3

    def __init__(self, message, record=None, history=None):
        super().__init__(message)
        self.record = record or {}
        self.history = history
