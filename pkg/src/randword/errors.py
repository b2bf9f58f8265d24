"""Exception hierarchy.

Every error carries the process exit code the CLI maps it to:
2 for configuration problems, 3 for numerical failures, 4 for data problems.
"""


class RandwordError(Exception):
    exit_code = 1


class ConfigError(RandwordError, ValueError):
    exit_code = 2

    def __init__(self, message, path=None, line=None):
        self.message = message
        self.path = path
        self.line = line
        where = ""
        if path:
            where += f"{path}: "
        if line is not None:
            where = f"line {line}: " + where
        super().__init__(where + message)


class NumericError(RandwordError, ArithmeticError):
    exit_code = 3


class BranchPointError(NumericError):
    """Energy sits on a branch point (D(z) = +-2) of the Floquet multipliers."""


class DirichletEigenvalueError(NumericError):
    """u_N(p+1, z) vanishes, so the (1, c) eigenvector normalization breaks down."""


class ConditioningError(NumericError):
    pass


class ConvergenceError(NumericError):
    pass


class DataError(RandwordError):
    exit_code = 4


class UnsupportedModeError(DataError):
    """Operation needs an atomic word measure but got a sampler-backed one."""


class ModelDegenerateError(DataError):
    """The chosen words commute, so condition (NC) fails."""


class WindowError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class DegenerateInputError(DataError):
    pass


class DomainError(DataError, ValueError):
    """Energy lies outside the strip or interval an operation is defined on."""


class BoxTooSmallError(DataError):
    """The evolved state reached the box boundary; enlarge the box."""
