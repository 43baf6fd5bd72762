import numpy as np
import pytest

from foresight.calibration import (
    SplitSpec,
    SvrModel,
    fit,
    predict,
    predict_many,
    split,
)
from foresight.calibration.svr import (
    default_gamma,
    kernel_matrix,
    smooth_targets,
    solve,
)
from foresight.exceptions import NonConvergence, PreconditionError, TooFewRecords
from foresight.model import CalibrationRow, validate
from foresight.scoring import ScoredSet, brier


def _benchmark(n, seed):
    """Estimates p with spread u whose events happen with probability p²"""
    rng = np.random.default_rng(seed)
    p = rng.uniform(0, 1, n)
    u = 0.2 * np.sqrt(p * (1 - p))
    o = (rng.uniform(0, 1, n) < p**2).astype(int)
    return [((float(a), float(b)), int(c)) for a, b, c in zip(p, u, o)]


def test_calibration_split():
    rows = [((0.1 * i, 0.0), i % 2) for i in range(5)]
    train, test = split(rows, SplitSpec(seed=1))
    assert len(train) == 3
    assert len(test) == 2
    assert sorted(train + test) == sorted(rows)
    assert split(rows, SplitSpec(seed=1)) == (train, test)

    rows = [((i / 144, 0.0), i % 2) for i in range(144)]
    train, test = split(rows, SplitSpec(seed=0))
    assert len(train) == len(test) == 72
    assert split(rows, SplitSpec(seed=2)) != (train, test)

    with pytest.raises(TooFewRecords):
        split(rows[:3], SplitSpec())


def test_calibration_identity():
    p = np.linspace(0.05, 0.95, 20)
    train = [((float(x), 0.1), float(x)) for x in p]
    model = fit(train, C=100, epsilon=0.01)
    assert validate(model) == []
    # continuous targets are not smoothed
    assert model.target_neighbours == 0
    for x in p:
        assert predict(model, x, 0.1) == pytest.approx(x, abs=0.02)
    for x in (p[:-1] + p[1:]) / 2:
        assert predict(model, x, 0.1) == pytest.approx(x, abs=0.03)


def test_calibration_constant():
    train = [((0.4, 0.05), 0.3)] * 5
    model = fit(train, C=1, epsilon=0.05)
    assert model.dual_coefficients == []
    assert model.bias == pytest.approx(0.3, abs=1e-12)
    assert predict(model, 0.4, 0.05) == pytest.approx(0.3, abs=1e-12)
    assert predict(model, 0.9, 0.2) == pytest.approx(0.3, abs=1e-12)


def test_calibration_benchmark():
    train, test = split(_benchmark(2000, 42), SplitSpec(seed=0))
    model = fit(train, C=1, epsilon=0.05)
    assert model.n_train == 1000
    assert model.target_neighbours == 32
    assert validate(model) == []

    assert predict(model, 0.5, 0.1) == pytest.approx(0.25, abs=0.1)
    assert predict(model, 0.1, 0.06) < predict(model, 0.9, 0.06)

    outcomes = [o for _, o in test]
    raw = brier(ScoredSet(pairs=[(f[0], o) for f, o in test]))
    calibrated = predict_many(model, [f for f, _ in test])
    calibrated = brier(ScoredSet(pairs=list(zip(calibrated, outcomes))))
    assert calibrated <= 0.95 * raw


def test_calibration_box_constraint():
    train = _benchmark(200, 3)
    for C in (0.01, 0.1, 10.0):
        model = fit(train, C=C, epsilon=0.01, target_neighbours=0)
        assert all(abs(c) <= C + 1e-9 for c in model.dual_coefficients)
        assert validate(model) == []
        values = predict_many(model, [f for f, _ in train])
        assert all(0 <= v <= 1 for v in values)


def test_calibration_deterministic(tmp_path):
    train = _benchmark(100, 5)
    model = fit(train)
    assert fit(train).dump() == model.dump()
    assert fit(list(train)).model_hash == model.model_hash

    path = tmp_path / "svr.json"
    model.save(path)
    assert path.read_bytes() == model.dump()
    loaded = SvrModel.load(path)
    assert loaded == model
    assert loaded.model_hash == model.model_hash
    assert predict(loaded, 0.3, 0.1) == predict(model, 0.3, 0.1)


def test_calibration_rows():
    rows = [
        CalibrationRow(
            forecast_id=str(i), p_hat=p, u_hat=0.1, outcome=o, topic="automotive"
        )
        for i, (p, o) in enumerate([(0.2, 0), (0.4, 0), (0.6, 1), (0.8, 1)])
    ]
    model = fit(rows, target_neighbours=0)
    assert model.n_train == 4
    assert predict(model, 0.2, 0.1) < predict(model, 0.8, 0.1)


def test_calibration_errors():
    with pytest.raises(TooFewRecords):
        fit([((0.5, 0.1), 1)])
    with pytest.raises(PreconditionError):
        fit([((0.5, 0.1), 1), ((0.2, 0.1), 0)], C=0)
    with pytest.raises(PreconditionError):
        fit([((0.5, 0.1), 1), ((0.2, 0.1), 0)], epsilon=-0.1)

    x = np.linspace(-1, 1, 10).reshape(-1, 1)
    with pytest.raises(NonConvergence) as e:
        solve(kernel_matrix(x, 1.0), x[:, 0], C=10, epsilon=0.01, max_passes=0)
    assert e.value.residual > 0


def test_calibration_helpers():
    x = np.array([[0.0], [1.0], [10.0]])
    y = np.array([0.0, 1.0, 1.0])
    assert smooth_targets(x, y, 2).tolist() == [0.5, 0.5, 1.0]
    assert smooth_targets(x, y, 1).tolist() == [0.0, 1.0, 1.0]
    assert smooth_targets(x, y, 10).tolist() == pytest.approx([2 / 3] * 3)

    assert default_gamma(np.zeros((4, 2))) == 0.5
    x = np.array([[1.0, -1.0], [-1.0, 1.0]])
    assert default_gamma(x) == 0.5
