"""Exception hierarchy shared by all modules."""


class SeqBetheError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(SeqBetheError):
    pass


class DimensionError(SeqBetheError, ValueError):
    pass


class IndexRangeError(SeqBetheError, IndexError):
    pass


class SizeCapError(SeqBetheError):
    pass


class PoleProximityError(SeqBetheError):
    pass


class ZeroVectorError(SeqBetheError):
    pass


class CoincidentRapidityError(SeqBetheError, ValueError):
    pass


# numerical failures -------------------------------------------------------

class NumericalError(SeqBetheError):
    """A computation ran but did not reach its tolerance."""


class StripError(NumericalError):
    pass


class QuadratureError(NumericalError):
    pass


class ScalarDomainError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = trace or []


class SingularJacobianError(NumericalError):
    pass


class RootCollisionError(NumericalError):
    pass


class OffShellError(NumericalError):
    pass


class PathFailureError(NumericalError):
    def __init__(self, msg, last_snapshot=None):
        super().__init__(msg)
        self.last_snapshot = last_snapshot


class NonSequentialError(NumericalError):
    def __init__(self, msg, miss=None, family=None):
        super().__init__(msg)
        self.miss = miss
        self.family = family


class DegenerateError(NumericalError):
    pass


class ExtrapolationError(NumericalError):
    pass
