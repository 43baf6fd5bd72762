import random

import pytest

from foresight.exceptions import EmptySet, PreconditionError
from foresight.model import CalibrationRow
from foresight.scoring import (
    ScoredSet,
    ScoreRow,
    brier,
    calibration_bins,
    method_scores,
    topic_breakdown,
)
from foresight.scoring.metrics import bin_index, improvements


def _brier(*pairs):
    return brier(ScoredSet(pairs=list(pairs)))


def test_scoring_brier():
    assert _brier((1.0, 1), (0.0, 0)) == 0.0
    assert _brier((0.5, 1), (0.5, 0), (0.5, 0)) == 0.25
    assert _brier((0.8, 1), (0.3, 0), (0.6, 0)) == pytest.approx(49 / 300, abs=1e-15)
    assert _brier((0.0, 1)) == 1.0
    with pytest.raises(EmptySet, match="empty"):
        brier(ScoredSet(pairs=[], label="empty"))


def test_scoring_brier_properties():
    rng = random.Random(3)
    for _ in range(200):
        n = rng.randint(1, 50)
        outcomes = [rng.randint(0, 1) for _ in range(n)]
        forecasts = [rng.uniform(0, 1) for _ in range(n)]
        score = _brier(*zip(forecasts, outcomes))
        assert 0 <= score <= 1
        assert score > 0
        assert _brier(*((float(o), o) for o in outcomes)) == 0

        # constant forecaster against the base rate
        f = rng.uniform(0, 1)
        r = sum(outcomes) / n
        expected = f**2 * (1 - r) + (1 - f) ** 2 * r
        assert _brier(*((f, o) for o in outcomes)) == pytest.approx(expected, abs=1e-12)


def test_scoring_scored_set():
    assert ScoredSet(pairs=[(0.2, 1)]).violations() == []
    assert ScoredSet(pairs=[]).violations() == ["non-empty"]
    assert ScoredSet(pairs=[(1.2, 1)]).violations() == ["all f_i in [0,1]"]


def test_scoring_bins():
    bins = calibration_bins([(0.05, 0.1, 0)] * 7)
    assert len(bins) == 10
    assert bins[0].count == 7
    assert bins[0].conversion_rate == 0
    assert bins[0].mean_predicted == pytest.approx(0.05)
    assert bins[0].mean_uncertainty == pytest.approx(0.1)
    assert all(b.count == 0 and b.mean_predicted is None for b in bins[1:])

    assert bin_index(1.0, 10) == 9
    assert bin_index(0.0, 10) == 0
    assert bin_index(0.1, 10) == 1
    assert bin_index(0.5, 4) == 2
    bins = calibration_bins([(1.0, 0.0, 1), (0.95, 0.2, 0)])
    assert bins[-1].count == 2
    assert (bins[-1].bin_low, bins[-1].bin_high) == (0.9, 1.0)
    assert bins[-1].conversion_rate == 0.5

    with pytest.raises(PreconditionError):
        calibration_bins([], n_bins=1)


def test_scoring_bins_oracle():
    rng = random.Random(11)
    for n_bins in (2, 5, 10, 20):
        records = [
            (
                rng.choice([rng.uniform(0, 1), 1.0, 0.0]),
                rng.uniform(0, 0.5),
                rng.randint(0, 1),
            )
            for _ in range(300)
        ]
        bins = calibration_bins(records, n_bins)
        assert sum(b.count for b in bins) == len(records)
        for ix, b in enumerate(bins):
            low, high = ix / n_bins, (ix + 1) / n_bins
            last = ix == n_bins - 1
            group = [r for r in records if low <= r[0] < high or (last and r[0] == 1.0)]
            assert b.count == len(group)
            if group:
                assert b.mean_predicted == pytest.approx(
                    sum(r[0] for r in group) / len(group)
                )
                assert b.conversion_rate == pytest.approx(
                    sum(r[2] for r in group) / len(group)
                )
                assert b.mean_uncertainty == pytest.approx(
                    sum(r[1] for r in group) / len(group)
                )
            else:
                assert b.conversion_rate is None


def test_scoring_topics():
    (row,) = topic_breakdown([("energy", 0.2, 1), ("energy", 0.4, 1)])
    assert row.topic == "energy"
    assert row.count == 2
    assert row.mean_predicted == pytest.approx(0.3)
    assert row.conversion_rate == 1.0
    assert row.gap == pytest.approx(0.7)

    (row,) = topic_breakdown([("energy", 0.9, 0)])
    assert row.gap == pytest.approx(-0.9)

    records = [("health", 0.6, 0), ("climate-change", 0.1, 1), ("health", 0.2, 1)]
    rows = topic_breakdown(records)
    assert [r.topic for r in rows] == ["climate-change", "health"]
    health = rows[1]
    assert health.count == 2
    assert health.mean_predicted == pytest.approx(0.4)
    assert health.conversion_rate == 0.5
    assert health.gap == pytest.approx(0.1)
    assert topic_breakdown([]) == []


def test_scoring_improvements():
    scores = [
        ScoreRow(method="random", n=72, brier=0.25),
        ScoreRow(method="baseline", n=72, brier=0.236),
        ScoreRow(method="estimator", n=72, brier=0.186),
        ScoreRow(method="manifold", n=39, brier=0.182),
    ]
    rows = improvements(scores)
    assert [(r["method"], r["baseline"]) for r in rows] == [
        ("baseline", "random"),
        ("estimator", "random"),
        ("estimator", "baseline"),
    ]
    estimator = rows[1]
    assert estimator["delta"] == pytest.approx(0.064)
    assert estimator["relative"] == pytest.approx(0.256)
    assert rows[2]["relative"] == pytest.approx(0.05 / 0.236)

    # computed rows follow the static ones and replace them
    scores.append(ScoreRow(method="baseline", n=2, brier=0.3))
    scores.append(ScoreRow(method="estimator", n=2, brier=0.2))
    rows = improvements(scores)
    assert [(r["method"], r["baseline"]) for r in rows] == [
        ("baseline", "random"),
        ("estimator", "random"),
        ("estimator", "baseline"),
    ]
    assert rows[2]["brier"] == 0.2
    assert rows[2]["baseline_brier"] == 0.3
    assert rows[2]["delta"] == pytest.approx(0.1)


def _row(forecast_id, p_hat, outcome, top_value=None):
    return CalibrationRow(
        forecast_id=forecast_id,
        p_hat=p_hat,
        u_hat=0.05,
        outcome=outcome,
        topic="automotive",
        top_value=top_value,
    )


def test_scoring_method_scores():
    rows = [_row("a", 0.8, 1, 0.9), _row("b", 0.4, 0, 0.2)]
    scores = method_scores(rows, [0.7, 0.1])
    assert [(s.method, s.n) for s in scores] == [
        ("random", 2),
        ("baseline", 2),
        ("estimator", 2),
        ("calibrated", 2),
    ]
    random_, baseline, estimator, calibrated = (s.brier for s in scores)
    assert random_ == 0.25
    assert baseline == pytest.approx((0.01 + 0.04) / 2)
    assert estimator == pytest.approx((0.04 + 0.16) / 2)
    assert calibrated == pytest.approx((0.09 + 0.01) / 2)

    # no top completion recorded for one row
    rows.append(_row("c", 0.5, 1))
    assert [s.method for s in method_scores(rows)] == ["random", "estimator"]
    assert method_scores([]) == []
    with pytest.raises(PreconditionError, match="One calibrated"):
        method_scores(rows, [0.5])
