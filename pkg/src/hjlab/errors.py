"""Exception types raised by hjlab."""


class HJLabError(Exception):
    """Base class for all hjlab errors."""


class NotNormalized(HJLabError):
    """H(0) or grad H(0) is nonzero where a normalized Hamiltonian is required."""


class NonFinite(HJLabError, ValueError):
    pass


class GridMismatch(HJLabError, ValueError):
    pass


class CFLViolation(HJLabError):
    pass


class Blowup(HJLabError):
    pass


class HorizonExceeded(HJLabError):
    """The characteristic foot-point map is no longer strictly increasing."""


class NotMonotone(HJLabError):
    pass


class HypothesisUnmet(HJLabError):
    """A hypothesis of the inequality being checked does not hold on the data."""


class ConeLeavesCell(HJLabError, ValueError):
    pass


class IndexOutOfRange(HJLabError, IndexError):
    pass
