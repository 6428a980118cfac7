"""Exception types raised across the package."""


class FlabError(Exception):
    """Base class for all library errors."""


class GrowthTooLarge(FlabError, ValueError):
    pass


class Undecidable(FlabError, ValueError):
    """Irrationality of a coefficient combination cannot be decided exactly."""


class PrecisionInsufficient(FlabError, ArithmeticError):
    pass


class ParseError(FlabError, ValueError):
    pass


class BadWeight(FlabError, ValueError):
    pass


class FourierOutOfRange(FlabError, KeyError):
    pass


class NonIntegerFrequency(FlabError, ValueError):
    pass


class SearchBudgetExceeded(FlabError, RuntimeError):
    pass


class NotIncreasing(FlabError, ValueError):
    pass


class FloorUndecidable(FlabError, ArithmeticError):
    pass


class HypothesisUnmet(FlabError, ValueError):
    """Inputs fall outside the hypotheses of the experiment being run.

    ``note`` carries the human-readable reason, which job outputs record.
    """

    def __init__(self, note):
        super().__init__(note)
        self.note = note
