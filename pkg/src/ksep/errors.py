"""Exception hierarchy for the ksep package."""


class KsepError(Exception):
    pass


class KernelError(KsepError, ValueError):
    """Base class for jump-kernel validation failures."""


class AsymmetricKernel(KernelError):
    pass


class MassAtZero(KernelError):
    pass


class NotNormalized(KernelError):
    pass


class Reducible(KernelError):
    pass


class ToleranceUnreachable(KsepError, RuntimeError):
    pass


class DomainError(KsepError, ValueError):
    pass


class OverlappingIntervals(KsepError, ValueError):
    pass


class ResourceExceeded(KsepError, RuntimeError):
    pass


class WindowExit(KsepError, RuntimeError):
    pass


class TooLarge(KsepError, ValueError):
    pass


class NotPositiveDefinite(KsepError, ValueError):
    pass


class TooFewSamples(KsepError, ValueError):
    pass


class ConfigError(KsepError, ValueError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")
