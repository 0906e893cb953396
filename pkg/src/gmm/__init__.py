from .models import FInstrumentMode, GmmEstimate, GmmProblem, GmmSteps, WeightKind, WeightMatrix, WeightPattern
from .instruments import absorb, build_instruments, expected_moment_count
from .estimator import GmmEstimator

__all__ = [
    "FInstrumentMode",
    "GmmEstimate",
    "GmmProblem",
    "GmmSteps",
    "WeightKind",
    "WeightMatrix",
    "WeightPattern",
    "absorb",
    "build_instruments",
    "expected_moment_count",
    "GmmEstimator",
]
