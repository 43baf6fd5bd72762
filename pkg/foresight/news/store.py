import threading
from datetime import date
from pathlib import Path
from typing import Any, Iterable

from anystore.io import smart_stream_json, smart_write
from anystore.logging import get_logger
from pydantic import ValidationError

from foresight.exceptions import (
    EmptyStore,
    LedgerWriteError,
    PreconditionError,
    ValidationFailed,
)
from foresight.model import (
    RelevanceScoredItem,
    SourceHeadline,
    Topic,
    TrendRecord,
    validate,
)
from foresight.news.relevance import RelevanceScorer, TfidfScorer
from foresight.util import canonical_json

log = get_logger(__name__)


def topic_query(topic: Topic) -> str:
    """Topic name expanded with its slug words"""
    return f"{topic.name} {topic.slug.replace('-', ' ')}"


class TrendStore:
    """In-memory trend records, optionally persisted as JSONL. Queries are
    lock free, ingestion is exclusive."""

    def __init__(
        self, path: Path | None = None, scorer: RelevanceScorer | None = None
    ) -> None:
        self.path = path
        self.scorer = scorer or TfidfScorer()
        self.records: list[TrendRecord] = []
        self._keys: set[tuple[str, date, date]] = set()
        self._lock = threading.Lock()
        if path is not None and path.exists():
            self.records = [
                TrendRecord.model_validate(r) for r in smart_stream_json(path)
            ]
            self._keys = {r.key for r in self.records}

    def __len__(self) -> int:
        return len(self.records)

    def ingest_trends(self, records: Iterable[TrendRecord | dict[str, Any]]) -> int:
        """Add trend records, skipping duplicates (same summary and window).
        The batch is rejected as a whole if any record is invalid.

        Returns:
            The number of newly ingested records
        """
        parsed: list[TrendRecord] = []
        reasons: dict[Any, list[str]] = {}
        for ix, data in enumerate(records):
            try:
                record = (
                    data
                    if isinstance(data, TrendRecord)
                    else TrendRecord.model_validate(data)
                )
            except ValidationError as e:
                reasons[ix] = [err["msg"] for err in e.errors()]
                continue
            errors = validate(record)
            if errors:
                reasons[ix] = errors
            parsed.append(record)
        if reasons:
            raise ValidationFailed(reasons=reasons)

        with self._lock:
            added = 0
            for record in parsed:
                if record.key not in self._keys:
                    self._keys.add(record.key)
                    self.records.append(record)
                    added += 1
            if added and self.path is not None:
                self.flush()
        log.info("Ingested trends", added=added, total=len(self.records))
        return added

    def flush(self) -> None:
        if self.path is None:
            return
        data = b"".join(canonical_json(r) + b"\n" for r in self.records)
        try:
            smart_write(self.path, data)
        except OSError as e:
            raise LedgerWriteError(f"Cannot write trend store: {e}") from e

    def relevant_trends(self, topic: Topic, limit: int) -> list[RelevanceScoredItem]:
        """Trends ranked by relevance to the topic. Trends tagged with the
        topic slug score 1, all others by TF-IDF similarity. Ties go to the
        later `window_end`, then to the summary slug."""
        if limit < 1:
            raise PreconditionError("limit must be positive")
        records = self.records
        if not records:
            raise EmptyStore("No trends ingested")
        lexical = self.scorer.score(topic_query(topic), [r.summary for r in records])
        scored = [
            RelevanceScoredItem(
                item=record, score=1.0 if topic.slug in record.topic_tags else score
            )
            for record, score in zip(records, lexical)
        ]
        scored.sort(
            key=lambda s: (-s.score, -s.item.window_end.toordinal(), s.item.slug)
        )
        return scored[:limit]


class HeadlineStore:
    """Fixture backed headline search"""

    def __init__(
        self,
        headlines: Iterable[SourceHeadline] | None = None,
        scorer: RelevanceScorer | None = None,
        min_score: float = 0.0,
    ) -> None:
        self.headlines = list(headlines or [])
        self.scorer = scorer or TfidfScorer()
        self.min_score = min_score

    @classmethod
    def from_path(cls, path: Path, **kwargs) -> "HeadlineStore":
        headlines = []
        if path.exists():
            headlines = [
                SourceHeadline.model_validate(h) for h in smart_stream_json(path)
            ]
        return cls(headlines, **kwargs)

    def search(
        self, query: str, start: date, end: date, limit: int
    ) -> list[RelevanceScoredItem]:
        if not self.headlines:
            raise EmptyStore("No headline fixtures loaded")
        candidates = [h for h in self.headlines if start <= h.published <= end]
        scores = self.scorer.score(query, [h.headline for h in candidates])
        scored = [
            RelevanceScoredItem(item=h, score=s)
            for h, s in zip(candidates, scores)
            if s > self.min_score
        ]
        scored.sort(
            key=lambda s: (-s.score, -s.item.published.toordinal(), s.item.headline)
        )
        return scored[:limit]
