import math
from bisect import bisect_right
from collections import defaultdict
from typing import Iterable, Sequence

from pydantic import BaseModel, ConfigDict

from foresight.exceptions import EmptySet, PreconditionError
from foresight.model import CalibrationRow


class ScoredSet(BaseModel):
    model_config = ConfigDict(frozen=True)

    pairs: list[tuple[float, int]]
    label: str = ""

    def violations(self) -> list[str]:
        errors = []
        if not self.pairs:
            errors.append("non-empty")
        if not all(0 <= f <= 1 for f, _ in self.pairs):
            errors.append("all f_i in [0,1]")
        if not all(o in (0, 1) for _, o in self.pairs):
            errors.append("all o_i in {0,1}")
        return errors


class CalibrationBin(BaseModel):
    model_config = ConfigDict(frozen=True)

    bin_low: float
    bin_high: float
    count: int = 0
    mean_predicted: float | None = None
    conversion_rate: float | None = None
    mean_uncertainty: float | None = None


class TopicRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    topic: str
    count: int
    mean_predicted: float
    conversion_rate: float
    gap: float
    """conversion - mean predicted: > 0 underestimated, < 0 overestimated"""


class ScoreRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    method: str
    n: int | None = None
    brier: float


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


def brier(scored: ScoredSet) -> float:
    """Mean squared difference of forecast probabilities and outcomes"""
    if not scored.pairs:
        raise EmptySet(f"Cannot score an empty set `{scored.label}`")
    return _mean([(f - o) ** 2 for f, o in scored.pairs])


def bin_index(p: float, n_bins: int) -> int:
    """Equal width bins [i/n, (i+1)/n), the last one closed at 1"""
    edges = [i / n_bins for i in range(n_bins + 1)]
    return min(max(bisect_right(edges, p) - 1, 0), n_bins - 1)


def calibration_bins(
    records: Iterable[tuple[float, float, int]], n_bins: int = 10
) -> list[CalibrationBin]:
    """Group (p, u, o) records by predicted probability. Empty bins are kept
    with count 0 and absent means."""
    if n_bins < 2:
        raise PreconditionError("n_bins must be at least 2")
    groups: list[list[tuple[float, float, int]]] = [[] for _ in range(n_bins)]
    for p, u, o in records:
        groups[bin_index(p, n_bins)].append((p, u, o))
    bins = []
    for ix, group in enumerate(groups):
        low, high = ix / n_bins, (ix + 1) / n_bins
        if not group:
            bins.append(CalibrationBin(bin_low=low, bin_high=high))
            continue
        bins.append(
            CalibrationBin(
                bin_low=low,
                bin_high=high,
                count=len(group),
                mean_predicted=_mean([p for p, _, _ in group]),
                conversion_rate=_mean([o for _, _, o in group]),
                mean_uncertainty=_mean([u for _, u, _ in group]),
            )
        )
    return bins


def topic_breakdown(records: Iterable[tuple[str, float, int]]) -> list[TopicRow]:
    groups: dict[str, list[tuple[float, int]]] = defaultdict(list)
    for topic, p, o in records:
        groups[topic].append((p, o))
    rows = []
    for topic in sorted(groups):
        group = groups[topic]
        mean_predicted = _mean([p for p, _ in group])
        conversion_rate = _mean([o for _, o in group])
        rows.append(
            TopicRow(
                topic=topic,
                count=len(group),
                mean_predicted=mean_predicted,
                conversion_rate=conversion_rate,
                gap=conversion_rate - mean_predicted,
            )
        )
    return rows


BASELINES = ("random", "baseline", "estimator")


def method_scores(
    rows: Sequence[CalibrationRow], calibrated: Sequence[float] | None = None
) -> list[ScoreRow]:
    """Brier scores of the coin flip, the top completion alone (`baseline`,
    if every row has one), the weighted estimate and, if given, the
    calibrated probabilities of the same rows"""
    if not rows:
        return []
    methods = {"random": [0.5] * len(rows)}
    if all(r.top_value is not None for r in rows):
        methods["baseline"] = [r.top_value for r in rows]  # type: ignore[misc]
    methods["estimator"] = [r.p_hat for r in rows]
    if calibrated is not None:
        if len(calibrated) != len(rows):
            raise PreconditionError("One calibrated probability per row expected")
        methods["calibrated"] = list(calibrated)
    outcomes = [r.outcome for r in rows]
    return [
        ScoreRow(
            method=method,
            n=len(rows),
            brier=brier(ScoredSet(pairs=list(zip(forecasts, outcomes)), label=method)),
        )
        for method, forecasts in methods.items()
    ]


def improvements(scores: Sequence[ScoreRow]) -> list[dict[str, str | float]]:
    """Absolute and relative Brier reduction of every method against each
    baseline method present. The last row of a method wins."""
    by_method = {s.method: s for s in scores}
    rows: list[dict[str, str | float]] = []
    for baseline in BASELINES:
        reference = by_method.get(baseline)
        if reference is None:
            continue
        for score in by_method.values():
            if score.method == baseline or score.method not in _compared(baseline):
                continue
            delta = reference.brier - score.brier
            rows.append(
                {
                    "method": score.method,
                    "baseline": baseline,
                    "brier": score.brier,
                    "baseline_brier": reference.brier,
                    "delta": delta,
                    "relative": delta / reference.brier if reference.brier else 0.0,
                }
            )
    return rows


def _compared(baseline: str) -> set[str]:
    # methods are compared against the baselines listed before them
    ix = BASELINES.index(baseline)
    return {*BASELINES[ix + 1 :], "calibrated"}
