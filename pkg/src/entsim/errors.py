"""Exception hierarchy shared by all modules.

``ConfigError`` maps to CLI exit code 2, every ``NumericalError`` to exit code 3.
"""


class EntsimError(Exception):
    pass


class ConfigError(EntsimError, ValueError):
    pass


class NumericalError(EntsimError, ArithmeticError):
    pass


class UnphysicalStateError(NumericalError):
    pass


class PositivityError(NumericalError):
    pass


class CutoffOverflowError(NumericalError):
    pass


class NullStateError(NumericalError):
    """Raised for the degenerate state with vanishing vacuum element."""


class SingularMatrixError(NumericalError):
    pass


class TimestepError(NumericalError):
    pass
