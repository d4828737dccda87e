"""Exception types shared across the package."""


class RandCoverError(Exception):
    """Base class for all package errors."""


class InvalidParameter(RandCoverError, ValueError):
    pass


class ConstructionDegenerate(InvalidParameter):
    """A Cantor construction produced fewer than two children at some level."""

    def __init__(self, level, branching):
        self.level = level
        self.branching = branching
        super().__init__(
            f"construction degenerate at level {level}: N_{level} = {branching} < 2"
        )


class UndefinedExponent(RandCoverError):
    pass


class NoMassAboveThreshold(RandCoverError):
    pass


class ZeroMeasureRestriction(RandCoverError):
    pass


class ExtrapolationRefused(RandCoverError):
    pass


class PrecisionNotReached(RandCoverError):
    """Energy bracket wider than requested; carries the bracket."""

    def __init__(self, lower, upper, message="requested precision not reached"):
        self.lower = lower
        self.upper = upper
        super().__init__(f"{message}: bracket [{lower:.6g}, {upper:.6g}]")
