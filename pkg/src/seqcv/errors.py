"""Exception types shared across the package.

Each class carries an ``exit_code`` used by the command line front end.
"""


class SeqCVError(Exception):
    """Base class for all package errors."""

    exit_code = 1
    code = "error"


class ConfigError(SeqCVError, ValueError):
    """Invalid configuration, plan or model parameters."""

    exit_code = 2
    code = "config_error"


class ArgumentDomainError(ConfigError):
    """A function argument lies outside its mathematical domain."""

    code = "argument_domain"


class DataError(SeqCVError, ValueError):
    """Malformed or missing input data."""

    exit_code = 3
    code = "data_error"


class DegenerateWindowError(SeqCVError, ArithmeticError):
    """A kernel weight sum vanished, so a normalized smoother is undefined."""

    exit_code = 4
    code = "degenerate_window"

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class DegenerateNormalizationError(SeqCVError, ArithmeticError):
    """The limiting norming integral is numerically zero."""

    exit_code = 4
    code = "degenerate_normalization"


class CalibrationBracketError(SeqCVError, RuntimeError):
    """The control limit bracket does not straddle the target run length."""

    exit_code = 5
    code = "calibration_bracket"

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
