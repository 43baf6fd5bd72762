import math
from pathlib import Path
from typing import Literal, Self, Sequence, TypeAlias

import numpy as np
from anystore.io import smart_read, smart_write
from anystore.logging import get_logger
from anystore.util import Took
from pydantic import BaseModel, ConfigDict

from foresight.calibration.svr import (
    default_gamma,
    kernel_matrix,
    neighbours_for,
    smooth_targets,
    solve,
)
from foresight.exceptions import PreconditionError, StorageError, TooFewRecords
from foresight.model import CalibrationRow
from foresight.util import canonical_json, make_hash

log = get_logger(__name__)

MIN_SPLIT = 4
BOX_TOLERANCE = 1e-9

Features: TypeAlias = tuple[float, float]
Sample: TypeAlias = tuple[Features, float]


class SplitSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int = 0
    fraction: Literal[0.5] = 0.5


class SvrModel(BaseModel):
    """Calibration function (p_hat, u_hat) -> probability. Support vectors
    are stored standardized."""

    model_config = ConfigDict(frozen=True)

    support_vectors: list[Features]
    dual_coefficients: list[float]
    bias: float
    kernel: Literal["rbf"] = "rbf"
    gamma: float
    C: float
    epsilon: float
    feature_means: Features
    feature_scales: Features
    # provenance
    target_neighbours: int = 0
    iterations: int = 0
    residual: float = 0.0
    tol: float = 1e-6
    n_train: int = 0
    train_hash: str = ""

    def violations(self) -> list[str]:
        errors = []
        if any(abs(c) > self.C + BOX_TOLERANCE for c in self.dual_coefficients):
            errors.append("|dual_coefficient| ≤ C")
        if len(self.support_vectors) != len(self.dual_coefficients):
            errors.append("support_vectors and dual_coefficients same length")
        if not all(s > 0 for s in self.feature_scales):
            errors.append("feature_scales > 0")
        if not self.gamma > 0:
            errors.append("gamma > 0")
        return errors

    @property
    def model_hash(self) -> str:
        return make_hash(self)[:16]

    def standardize(self, features: np.ndarray) -> np.ndarray:
        return (features - np.array(self.feature_means)) / np.array(
            self.feature_scales
        )

    def decision(self, features: np.ndarray) -> np.ndarray:
        """Raw (unclamped) kernel expansion for an (m, 2) feature array"""
        x = self.standardize(np.atleast_2d(np.asarray(features, dtype=np.float64)))
        if not self.support_vectors:
            return np.full(len(x), self.bias)
        sv = np.array(self.support_vectors, dtype=np.float64)
        diff = x[:, None, :] - sv[None, :, :]
        weights = np.exp(-self.gamma * np.einsum("ijk,ijk->ij", diff, diff))
        return weights @ np.array(self.dual_coefficients) + self.bias

    def dump(self) -> bytes:
        return canonical_json(self)

    def save(self, path: Path | str) -> None:
        try:
            smart_write(str(path), self.dump())
        except OSError as e:
            raise StorageError(f"Cannot write model: {e}") from e

    @classmethod
    def load(cls, path: Path | str) -> Self:
        return cls.model_validate(smart_read(str(path), serialization_mode="json"))


def split(
    records: Sequence[CalibrationRow | Sample], spec: SplitSpec
) -> tuple[list, list]:
    """Shuffle with the seed and cut in halves, an odd record goes to train"""
    n = len(records)
    if n < MIN_SPLIT:
        raise TooFewRecords(f"Need at least {MIN_SPLIT} records to split, got {n}")
    order = np.random.default_rng(spec.seed).permutation(n)
    n_train = math.ceil(n * spec.fraction)
    train = [records[i] for i in order[:n_train]]
    test = [records[i] for i in order[n_train:]]
    return train, test


def as_samples(records: Sequence[CalibrationRow | Sample]) -> list[Sample]:
    samples = []
    for record in records:
        if isinstance(record, CalibrationRow):
            samples.append((record.features, float(record.outcome)))
        else:
            (p, u), o = record
            samples.append(((float(p), float(u)), float(o)))
    return samples


def fit(
    train: Sequence[CalibrationRow | Sample],
    C: float = 1.0,
    epsilon: float = 0.05,
    gamma: float | None = None,
    tol: float = 1e-6,
    max_passes: int = 10_000,
    target_neighbours: int | None = None,
) -> SvrModel:
    """Fit the epsilon-SVR calibration function on ((p_hat, u_hat), outcome)
    samples.

    Binary targets are first smoothed to the outcome rate of their
    `target_neighbours` nearest neighbours (default ceil(sqrt(n)), 0 turns
    smoothing off): under the epsilon-insensitive loss raw 0/1 targets pull
    the fit towards the conditional median instead of the mean.
    """
    samples = as_samples(train)
    if len(samples) < 2:
        raise TooFewRecords(f"Need at least 2 training records, got {len(samples)}")
    if not C > 0 or not epsilon >= 0 or (gamma is not None and not gamma > 0):
        raise PreconditionError("Invalid hyperparameters: need C > 0, ε ≥ 0, γ > 0")

    features = np.array([s[0] for s in samples], dtype=np.float64)
    targets = np.array([s[1] for s in samples], dtype=np.float64)
    means = features.mean(axis=0)
    scales = features.std(axis=0)
    scales[scales < 1e-12] = 1.0
    x = (features - means) / scales

    k = 0
    if np.isin(targets, (0.0, 1.0)).all():
        k = neighbours_for(len(targets), target_neighbours)
        if k > 0:
            targets = smooth_targets(x, targets, k)

    gamma = gamma or default_gamma(x)
    with Took() as t:
        solution = solve(kernel_matrix(x, gamma), targets, C, epsilon, tol, max_passes)
    keep = np.abs(solution.beta) > 0
    model = SvrModel(
        support_vectors=[(float(a), float(b)) for a, b in x[keep]],
        dual_coefficients=[float(c) for c in solution.beta[keep]],
        bias=float(solution.bias),
        gamma=float(gamma),
        C=C,
        epsilon=epsilon,
        feature_means=(float(means[0]), float(means[1])),
        feature_scales=(float(scales[0]), float(scales[1])),
        target_neighbours=k,
        iterations=solution.iterations,
        residual=float(solution.residual),
        tol=tol,
        n_train=len(samples),
        train_hash=make_hash(samples),
    )
    log.info(
        "Fitted calibration model",
        n=len(samples),
        support_vectors=len(model.support_vectors),
        iterations=solution.iterations,
        took=t.took,
    )
    return model


def predict(model: SvrModel, p_hat: float, u_hat: float) -> float:
    """Calibrated probability, clamped to [0, 1]"""
    value = float(model.decision(np.array([[p_hat, u_hat]]))[0])
    return min(max(value, 0.0), 1.0)


def predict_many(model: SvrModel, features: Sequence[Features]) -> list[float]:
    if not features:
        return []
    values = np.clip(model.decision(np.array(features, dtype=np.float64)), 0.0, 1.0)
    return [float(v) for v in values]
