"""Domain records shared by every stage.

Records are immutable values. Invariants are not enforced on construction:
`validate()` reports violations as a list of strings and `ensure_valid()`
raises for operations that need valid input.
"""

import math
import re
from datetime import date
from enum import StrEnum
from typing import Any, Iterable, Literal, Self

from normality import slugify
from pydantic import BaseModel, ConfigDict

from foresight.exceptions import PreconditionError, ValidationFailed
from foresight.settings import TOPICS
from foresight.util import make_hash

SLUG_RE = re.compile(r"^[a-z0-9]+(?:-[a-z0-9]+)*$")
TOLERANCE = 1e-12


def make_slug(value: str) -> str:
    return slugify(value, sep="-") or ""


class Record(BaseModel):
    model_config = ConfigDict(frozen=True)

    def violations(self) -> list[str]:
        return []


class Topic(Record):
    name: str
    identifier: str

    @property
    def slug(self) -> str:
        return self.identifier

    @classmethod
    def from_name(cls, name: str) -> Self:
        return cls(name=name, identifier=make_slug(name))

    @classmethod
    def from_slug(cls, slug: str, topics: Iterable[str] = TOPICS) -> Self:
        """Look up a topic of the taxonomy by slug, or make up a name for an
        unknown one"""
        for name in topics:
            if make_slug(name) == slug:
                return cls.from_name(name)
        return cls(name=slug.replace("-", " ").title(), identifier=slug)

    def violations(self) -> list[str]:
        errors = []
        if not self.name.strip():
            errors.append("name non-empty")
        if not SLUG_RE.match(self.identifier):
            errors.append("slug lowercase, URL-safe")
        return errors


class TrendRecord(Record):
    summary: str
    topic_tags: list[str] = []
    source_count: int = 0
    window_start: date
    window_end: date

    @property
    def slug(self) -> str:
        return make_slug(self.summary)

    @property
    def key(self) -> tuple[str, date, date]:
        return self.summary, self.window_start, self.window_end

    def violations(self) -> list[str]:
        errors = []
        if not self.summary.strip():
            errors.append("summary non-empty")
        if self.window_start > self.window_end:
            errors.append("window_start ≤ window_end")
        if self.source_count < 0:
            errors.append("source_count ≥ 0")
        return errors


class SourceHeadline(Record):
    headline: str
    published: date
    origin: str = ""

    def violations(self) -> list[str]:
        if not self.headline.strip():
            return ["headline non-empty"]
        return []


class RelevanceScoredItem(Record):
    item: TrendRecord | SourceHeadline
    score: float

    def violations(self) -> list[str]:
        if not 0 <= self.score <= 1:
            return ["0 ≤ score ≤ 1"]
        return []


class ForecastSpec(Record):
    id: str
    topic: str
    title: str
    description: str
    timeframe_start: date
    timeframe_end: date
    created_at: date
    seed_trends: list[str] = []
    template: str | None = None

    @staticmethod
    def make_id(topic: str, title: str, start: date, end: date) -> str:
        return make_hash(
            {"topic": topic, "title": title, "start": start, "end": end}
        )[:16]

    @classmethod
    def create(cls, **data: Any) -> Self:
        """Create a spec with a content hash id unless one is given"""
        if not data.get("id"):
            data["id"] = cls.make_id(
                data["topic"],
                data["title"],
                data["timeframe_start"],
                data["timeframe_end"],
            )
        return cls(**data)

    def violations(self) -> list[str]:
        errors = []
        if not self.id:
            errors.append("id non-empty")
        if self.timeframe_start >= self.timeframe_end:
            errors.append("timeframe_start < timeframe_end")
        if self.created_at > self.timeframe_end:
            errors.append("created_at ≤ timeframe_end")
        if not self.title.strip():
            errors.append("title non-empty")
        if not self.description.strip():
            errors.append("description non-empty")
        return errors


class ProbabilityGuess(Record):
    value: float
    logprob: float

    def violations(self) -> list[str]:
        errors = []
        if not self.value >= 0:
            errors.append("0 ≤ value")
        if not self.value <= 1:
            errors.append("value ≤ 1")
        if not math.isfinite(self.logprob):
            errors.append("logprob finite")
        return errors


class EstimateResult(Record):
    forecast_id: str
    p_hat: float
    u_hat: float
    guesses: list[ProbabilityGuess]
    top_value: float | None = None
    """Value of the chosen token alone, `None` if out of range"""
    positive_trends: list[str] = []
    negative_trends: list[str] = []
    estimated_at: date
    normalized_event: str | None = None
    category: str | None = None
    key_events: list[str] = []
    is_exclusive: bool = False
    set_label: str | None = None
    sources_empty: bool = False
    template: str | None = None

    def violations(self) -> list[str]:
        errors = []
        if not self.guesses:
            errors.append("guesses non-empty")
        else:
            values = [g.value for g in self.guesses]
            if not min(values) - TOLERANCE <= self.p_hat <= max(values) + TOLERANCE:
                errors.append("min(guess values) ≤ p_hat ≤ max(guess values)")
            for guess in self.guesses:
                errors.extend(f"guess: {e}" for e in guess.violations())
        if not 0 <= self.p_hat <= 1:
            errors.append("0 ≤ p_hat ≤ 1")
        if not self.u_hat >= 0:
            errors.append("u_hat ≥ 0")
        if self.top_value is not None and not 0 <= self.top_value <= 1:
            errors.append("0 ≤ top_value ≤ 1")
        return errors


class Verdict(StrEnum):
    HAPPENED = "happened"
    INCONCLUSIVE = "inconclusive"
    DID_NOT_HAPPEN = "did_not_happen"

    @property
    def code(self) -> int:
        return VERDICT_CODES[self]

    @property
    def numeric_code(self) -> int:
        return self.code

    @property
    def conclusive(self) -> bool:
        return self is not Verdict.INCONCLUSIVE

    @property
    def binary_outcome(self) -> int | None:
        if self is Verdict.HAPPENED:
            return 1
        if self is Verdict.DID_NOT_HAPPEN:
            return 0
        return None

    @classmethod
    def from_code(cls, code: int) -> "Verdict":
        for verdict, value in VERDICT_CODES.items():
            if value == code:
                return verdict
        raise PreconditionError(f"Invalid verdict code: `{code}`")

    @classmethod
    def parse(cls, value: str) -> "Verdict":
        """Parse a label as a model writes it (`Happened`, `did not happen`,
        `-1`, ...)"""
        value = value.strip().strip(".").strip()
        try:
            return cls.from_code(int(value))
        except (ValueError, PreconditionError):
            pass
        slug = make_slug(value).replace("-", "_")
        for verdict in cls:
            if verdict.value == slug:
                return verdict
        raise PreconditionError(f"Invalid verdict: `{value}`")


VERDICT_CODES = {
    Verdict.HAPPENED: 1,
    Verdict.INCONCLUSIVE: 0,
    Verdict.DID_NOT_HAPPEN: -1,
}


class OutcomeRecord(Record):
    forecast_id: str
    verdict: Verdict
    checked_at: date
    binary_outcome: Literal[0, 1] | None = None
    purpose: Literal["outcome", "screening"] = "outcome"
    evidence: list[int] = []
    impossible: bool = False
    uncited: bool = False
    downgraded: bool = False

    @classmethod
    def from_verdict(cls, forecast_id: str, verdict: Verdict, **data: Any) -> Self:
        return cls(
            forecast_id=forecast_id,
            verdict=verdict,
            binary_outcome=verdict.binary_outcome,
            **data,
        )

    def violations(self) -> list[str]:
        errors = []
        if (self.binary_outcome == 1) != (self.verdict is Verdict.HAPPENED):
            errors.append("binary_outcome = 1 iff verdict = Happened")
        if (self.binary_outcome == 0) != (self.verdict is Verdict.DID_NOT_HAPPEN):
            errors.append("binary_outcome = 0 iff verdict = DidNotHappen")
        if (self.binary_outcome is None) != (self.verdict is Verdict.INCONCLUSIVE):
            errors.append("binary_outcome absent iff verdict = Inconclusive")
        return errors


class CalibratedValue(Record):
    """A probability derived from an estimate: exclusivity reconciliation or
    the SVR calibration model"""

    forecast_id: str
    p: float
    method: Literal["reconcile", "svr"]
    set_label: str | None = None
    model_hash: str | None = None
    split: Literal["train", "test"] | None = None
    """Part of the calibration dataset the forecast was in when fitted"""

    def violations(self) -> list[str]:
        if not 0 <= self.p <= 1:
            return ["0 ≤ p ≤ 1"]
        return []


class Lifecycle(StrEnum):
    GENERATED = "generated"
    ESTIMATED = "estimated"
    RECONCILED = "reconciled"
    FACTCHECKED = "factchecked"
    SCORED = "scored"


class CalibrationRow(BaseModel):
    """One joined (estimate, outcome) row of the calibration dataset"""

    model_config = ConfigDict(frozen=True)

    forecast_id: str
    p_hat: float
    u_hat: float
    outcome: Literal[0, 1]
    topic: str
    top_value: float | None = None

    @property
    def features(self) -> tuple[float, float]:
        return self.p_hat, self.u_hat


def validate(record: Record) -> list[str]:
    """Report the violated invariants of a domain record. An empty list
    means valid. Never raises."""
    try:
        return record.violations()
    except Exception as e:  # incomplete records
        return [f"unverifiable: {e}"]


def ensure_valid(record: Record) -> Record:
    errors = validate(record)
    if errors:
        raise ValidationFailed(reasons={type(record).__name__: errors})
    return record
