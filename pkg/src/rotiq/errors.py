"""Exception hierarchy shared across the package."""


class RotiqError(Exception):
    """Base class for domain errors (the CLI maps these to exit code 1)."""


class DimensionError(RotiqError, ValueError):
    """Operands have incompatible qubit counts or array shapes."""


class EmptySpanError(RotiqError, ValueError):
    pass


class ClosureCapExceeded(RotiqError):
    pass


class EncodingError(RotiqError, ValueError):
    pass


class ConfigError(RotiqError, ValueError):
    pass


class DatasetFormatError(RotiqError):
    pass


class NonFiniteGradient(RotiqError, FloatingPointError):
    pass
