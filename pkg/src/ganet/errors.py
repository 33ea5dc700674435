"""Exception hierarchy. Each family maps onto one CLI exit status."""


class GanetError(Exception):
    exit_code = 4


class InputError(GanetError):
    """Unreadable or malformed input data."""

    exit_code = 2


class IngestError(InputError, ValueError):
    pass


class ModelFormatError(InputError):
    """A model file that cannot be parsed."""


class UnknownLabelError(InputError, ValueError):
    pass


class ConfigError(GanetError, ValueError):
    exit_code = 3


class ModelVersionError(ConfigError):
    pass


class PreprocessError(GanetError, ValueError):
    exit_code = 3


class SplitError(GanetError, ValueError):
    exit_code = 3


class DimensionError(GanetError, ValueError):
    exit_code = 4


class ConvergenceError(GanetError, RuntimeError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual
