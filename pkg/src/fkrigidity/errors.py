"""Exception hierarchy shared by all modules.

The CLI maps these onto exit statuses: configuration/input problems exit 2,
numeric and statistics problems exit 3.
"""


class RigidityError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 3
    kind = "error"


class InputError(RigidityError, ValueError):
    exit_code = 2
    kind = "input"


class ConfigurationError(RigidityError, ValueError):
    exit_code = 2
    kind = "configuration"


class ModelError(RigidityError):
    """A covariance model is not positive semidefinite on the requested grid."""

    exit_code = 3
    kind = "model"


class NumericError(RigidityError, ArithmeticError):
    exit_code = 3
    kind = "numeric"


class StatisticsError(RigidityError):
    exit_code = 3
    kind = "statistics"


class RangeError(NumericError):
    kind = "range"
