from functools import cached_property
from pathlib import Path

from anystore.io import smart_stream_json
from anystore.logging import get_logger

from foresight.estimate.pipeline import Pipeline
from foresight.factcheck.checker import FactChecker
from foresight.forecast.generator import ForecastGenerator
from foresight.ledger.store import Ledger
from foresight.llm.base import Gateway
from foresight.llm.mock import MockGateway, RecordingGateway
from foresight.news import HeadlineProvider, News
from foresight.news.store import HeadlineStore, TrendStore
from foresight.settings import Settings

log = get_logger(__name__)

TRENDS_FIXTURE = "trends.jsonl"
HEADLINES_FIXTURE = "headlines.jsonl"


def get_gateway(settings: Settings, record: Path | None = None) -> Gateway:
    gateway: Gateway
    if settings.mock_fixtures_dir is not None:
        gateway = MockGateway(settings.mock_fixtures_dir, settings)
    else:
        from foresight.llm.live import OpenAIGateway

        gateway = OpenAIGateway(settings)
    if record is not None:
        gateway = RecordingGateway(gateway, record)
    return gateway


def get_news(settings: Settings) -> News:
    headlines: HeadlineProvider
    mock = settings.mock_fixtures_dir
    if mock is not None:
        trends = TrendStore()
        trends_path = mock / TRENDS_FIXTURE
        if trends_path.exists():
            trends.ingest_trends(smart_stream_json(trends_path))
        headlines = HeadlineStore.from_path(
            mock / HEADLINES_FIXTURE, min_score=settings.source_min_score
        )
        return News(trends, headlines)
    trends = TrendStore(settings.trends_path)
    if settings.news_url:
        from foresight.news.live import LiveHeadlines

        headlines = LiveHeadlines(settings)
    else:
        log.warning("No news provider configured, searching without sources")
        headlines = HeadlineStore(min_score=settings.source_min_score)
    return News(trends, headlines)


class Runtime:
    """Lazily wired components for one command line invocation"""

    def __init__(self, settings: Settings, record: Path | None = None) -> None:
        self.settings = settings
        self.record = record

    @cached_property
    def ledger(self) -> Ledger:
        return Ledger(self.settings.ledger_path)

    @cached_property
    def gateway(self) -> Gateway:
        return get_gateway(self.settings, self.record)

    @cached_property
    def news(self) -> News:
        return get_news(self.settings)

    @cached_property
    def generator(self) -> ForecastGenerator:
        return ForecastGenerator(self.gateway, self.news, self.settings)

    @cached_property
    def pipeline(self) -> Pipeline:
        return Pipeline(self.gateway, self.news, self.settings)

    @cached_property
    def checker(self) -> FactChecker:
        return FactChecker(self.gateway, self.news, self.settings)

    @property
    def trace_path(self) -> Path:
        if self.settings.trace_path is not None:
            return self.settings.trace_path
        ledger = self.settings.ledger_path
        return ledger.with_name(ledger.name + ".trace.jsonl")
