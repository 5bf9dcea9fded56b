class SplitreeError(Exception):
    """Base error; exit_code is the process exit status used by the CLI"""
    exit_code = 1


class ParameterError(SplitreeError, ValueError):
    """Invalid model parameters or lifespan specification"""


class DomainError(SplitreeError, ValueError):
    """Argument outside the domain of an operation"""


class SupercriticalityError(DomainError):
    """Operation requires a supercritical model (alpha > 0)"""

    def __init__(self, message="requires supercritical"):
        super().__init__(message)


class ConfigurationError(SplitreeError):
    """Numerical or experiment configuration that cannot be honoured"""


class InsufficientSamplesError(SplitreeError, ValueError):
    """Statistic requested on too few samples"""
