"""Exception hierarchy shared by every module."""


class EqgradError(Exception):
    """Base class for all errors raised by eqgrad."""


class ShapeError(EqgradError, ValueError):
    pass


class RegistryError(EqgradError, KeyError):
    def __str__(self):  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class ContractError(EqgradError, ValueError):
    """A precondition of an operation was violated."""


class NumericError(EqgradError, ArithmeticError):
    pass


class DegenerateInputError(EqgradError, ValueError):
    pass


class FormatError(EqgradError, ValueError):
    """A file was readable but its contents do not follow the expected format."""


class CorruptionError(EqgradError, ValueError):
    """A file failed its integrity check or ended early."""


class IdxIOError(EqgradError, OSError):
    pass


class DivergenceError(EqgradError, ArithmeticError):
    """Training produced a non-finite loss."""
