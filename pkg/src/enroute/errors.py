"""Exception hierarchy shared by all enroute modules."""


class EnrouteError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgument(EnrouteError, ValueError):
    pass


class TopologyError(EnrouteError):
    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class ValidationError(EnrouteError):
    pass


class InvertibilityError(EnrouteError):
    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class ParityViolation(EnrouteError):
    pass


class PlanError(EnrouteError):
    pass


class AccountingError(EnrouteError):
    pass


class SymbolRangeError(EnrouteError, ValueError):
    pass


class UndefinedSignal(EnrouteError, ValueError):
    pass


class ConfigError(EnrouteError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
