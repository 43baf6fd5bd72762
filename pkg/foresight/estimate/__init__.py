from foresight.estimate.consistency import OutcomeSet, detect_exclusive, renormalize
from foresight.estimate.estimator import (
    AnchorPolicy,
    aggregate,
    extract_guesses,
    find_anchor,
    parse_value,
)
from foresight.estimate.pipeline import Pipeline, StageTrace

__all__ = [
    "AnchorPolicy",
    "OutcomeSet",
    "Pipeline",
    "StageTrace",
    "aggregate",
    "detect_exclusive",
    "extract_guesses",
    "find_anchor",
    "parse_value",
    "renormalize",
]
