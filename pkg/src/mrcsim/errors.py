"""Exception hierarchy shared across the package."""


class MRCError(Exception):
    """Base class for all errors raised by mrcsim."""


class ConfigurationError(MRCError, ValueError):
    pass


class ResourceError(MRCError):
    pass


class NumericalError(MRCError, ArithmeticError):
    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class ValidationError(MRCError, ValueError):
    pass


class CalibrationError(MRCError):
    def __init__(self, message, measured=None):
        super().__init__(message)
        self.measured = measured


class MeasurementError(MRCError):
    pass
