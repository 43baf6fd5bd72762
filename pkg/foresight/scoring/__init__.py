from foresight.scoring.metrics import (
    CalibrationBin,
    ScoredSet,
    ScoreRow,
    TopicRow,
    brier,
    calibration_bins,
    method_scores,
    topic_breakdown,
)
from foresight.scoring.report import emit_report

__all__ = [
    "CalibrationBin",
    "ScoreRow",
    "ScoredSet",
    "TopicRow",
    "brier",
    "calibration_bins",
    "emit_report",
    "method_scores",
    "topic_breakdown",
]
