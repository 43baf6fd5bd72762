from foresight.core import Runtime
from foresight.estimate.estimator import aggregate, extract_guesses
from foresight.estimate.pipeline import Pipeline
from foresight.factcheck.checker import FactChecker
from foresight.forecast.generator import ForecastGenerator
from foresight.ledger import Ledger
from foresight.model import (
    EstimateResult,
    ForecastSpec,
    OutcomeRecord,
    ProbabilityGuess,
    Topic,
    Verdict,
)
from foresight.settings import __version__

__all__ = [
    "EstimateResult",
    "FactChecker",
    "ForecastGenerator",
    "ForecastSpec",
    "Ledger",
    "OutcomeRecord",
    "Pipeline",
    "ProbabilityGuess",
    "Runtime",
    "Topic",
    "Verdict",
    "__version__",
    "aggregate",
    "extract_guesses",
]
