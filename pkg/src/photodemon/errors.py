"""Exception hierarchy shared by all photodemon modules."""


class PhotodemonError(Exception):
    """Base class for every error raised by this package."""


class CutoffTooSmallError(PhotodemonError, ValueError):
    """The photon-number cutoff leaves more tail mass than allowed."""


class UndefinedG2Error(PhotodemonError, ValueError):
    """g2(0) requested for a distribution with zero mean."""


class ZeroProbabilityOutcomeError(PhotodemonError, ValueError):
    """Conditioning on a click outcome whose probability is below the floor."""


class UnmatchedGridError(PhotodemonError, ValueError):
    """Quantum and classical sweep points do not pair up."""


class NumericalInstabilityError(PhotodemonError, ArithmeticError):
    """Round-off produced values outside the tolerated band."""


class DegenerateResponseError(PhotodemonError, ArithmeticError):
    """Detector response cannot support the requested inversion."""


class NotUnimodalError(PhotodemonError, ArithmeticError):
    """Gain curve has more than one local maximum on the scan."""
