"""
Exceptions raised by magnet, each mapped to a CLI exit code
"""


class MagnetError(Exception):
    """Base class for all magnet failures"""

    exit_code = 1

    def __init__(self, message, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self):
        return {
            "error": type(self).__name__,
            "message": self.message,
            "details": self.details,
        }


class UsageError(MagnetError):
    """Bad command line usage"""

    exit_code = 1


class InputError(MagnetError, ValueError):
    """Malformed or inconsistent input: shapes, indices, files, masks"""

    exit_code = 2


class NumericalError(MagnetError, ArithmeticError):
    """Non-PD input, Cholesky failure, step-size underflow, degenerate fits"""

    exit_code = 3


class ConvergenceWarning(UserWarning):
    """Solver stopped on max_sweeps before the stopping rule was met"""
