from datetime import date
from typing import Iterable, Protocol

from anystore.logging import get_logger

from foresight.exceptions import PreconditionError
from foresight.model import RelevanceScoredItem, SourceHeadline, Topic, TrendRecord
from foresight.news.store import HeadlineStore, TrendStore

log = get_logger(__name__)


class HeadlineProvider(Protocol):
    def search(
        self, query: str, start: date, end: date, limit: int
    ) -> list[RelevanceScoredItem]: ...


class News:
    """Retrieval of trends and headlines relevant to a topic or an event"""

    def __init__(self, trends: TrendStore, headlines: HeadlineProvider) -> None:
        self.trends = trends
        self.headlines = headlines

    def relevant_trends(self, topic: Topic, limit: int) -> list[RelevanceScoredItem]:
        return self.trends.relevant_trends(topic, limit)

    def ingest_trends(self, records: Iterable[TrendRecord]) -> int:
        return self.trends.ingest_trends(records)

    def search_sources(
        self, query: str, date_range: tuple[date, date], limit: int
    ) -> list[SourceHeadline]:
        """Headlines published within `date_range` (inclusive), most
        relevant first"""
        start, end = date_range
        if not query or not query.strip():
            raise PreconditionError("Query must not be empty")
        if start > end:
            raise PreconditionError(f"Invalid date range: {start} > {end}")
        if limit < 1:
            raise PreconditionError("limit must be positive")
        results = self.headlines.search(query, start, end, limit)
        log.debug(
            "Searched sources", query=query, start=start, end=end, results=len(results)
        )
        return [r.item for r in results]  # type: ignore[misc]


__all__ = ["HeadlineStore", "News", "TrendStore", "HeadlineProvider"]
