"""flab: numerical laboratory for Hardy-field sequences modulo one.

Modules
-------
hardy        expressions, classification (cases I-V), extended-precision evaluation
averaging    Cesàro/weighted averages with deterministic parallel reductions
correlation  empirical correlations of sequences along shift patterns
oracle       predicted correlations and the unipotent-model reconciliation
measures     empirical limit measures of a^(d)(n)/d! mod 1
systems      torus rotations, unipotent orbits, Beatty times, weights
experiments  pass/fail experiments with JSON verdicts
jobrunner    command-line job runner
"""

__version__ = "0.1.0"

from .errors import (BadWeight, FlabError, FloorUndecidable, FourierOutOfRange, GrowthTooLarge,  # noqa: F401
                     HypothesisUnmet, NonIntegerFrequency, NotIncreasing, ParseError, PrecisionInsufficient,
                     SearchBudgetExceeded, Undecidable)
from .hardy import HardyExpr, classify, eval_frac, parse  # noqa: F401
