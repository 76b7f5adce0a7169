"""Online learning algorithms for the random-order input model."""

from .core import (Bandit, ConfigurationError, Delayed, Full, LossInstance, Permutation, RoundStream,
                   ValidationError, UsageError, NumericalError, make_stream)
from .regret import RegretReport, evaluate_regret

__version__ = "0.1.0"
