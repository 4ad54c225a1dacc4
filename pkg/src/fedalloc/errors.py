"""Exception hierarchy. Each top-level category maps to a CLI exit code."""


class FedAllocError(Exception):
    exit_code = 1


class ConfigError(FedAllocError, ValueError):
    exit_code = 2


class BoundError(FedAllocError, ArithmeticError):
    exit_code = 3


class DiscriminantNegative(BoundError):
    """The round-count quadratic has no real root."""


class DegenerateBound(BoundError):
    """The quadratic coefficient vanishes (zero compressor loss)."""


class NoRootInRange(BoundError):
    pass


class AllInfeasible(BoundError):
    """No participating-device count yields a finite round bound."""


class AllocationError(FedAllocError):
    exit_code = 4


class InfeasibleAssignment(AllocationError, ValueError):
    pass


class TooFewChannels(AllocationError, ValueError):
    pass


class InstanceTooLarge(AllocationError):
    pass


class GameDidNotConverge(AllocationError, RuntimeError):
    pass


class RadioError(FedAllocError):
    exit_code = 5


class ZeroRate(RadioError, ArithmeticError):
    """A link (or a device's summed rate) is zero bits per second."""


class EmptyParticipantSet(FedAllocError, ValueError):
    exit_code = 6
