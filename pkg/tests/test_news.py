import math
import re
from collections import Counter
from datetime import date, timedelta

import pytest

from foresight.exceptions import (
    EmptyStore,
    PreconditionError,
    ProviderUnavailable,
    ValidationFailed,
)
from foresight.model import SourceHeadline, Topic, TrendRecord
from foresight.news import News
from foresight.news.live import LiveHeadlines
from foresight.news.store import HeadlineStore, TrendStore, topic_query
from foresight.settings import Settings


def _trend(summary, end=date(2024, 1, 31), tags=None):
    return TrendRecord(
        summary=summary,
        topic_tags=tags or [],
        source_count=3,
        window_start=date(2024, 1, 1),
        window_end=end,
    )


def test_news_ingest_trends(tmp_path):
    store = TrendStore(tmp_path / "trends.jsonl")
    record = _trend("Battery prices fall")
    assert store.ingest_trends([record, record]) == 1
    assert store.ingest_trends([record]) == 0
    assert len(store) == 1
    assert store.ingest_trends([_trend("a"), _trend("b"), _trend("c")]) == 3
    assert len(store) == 4

    # persisted and reloaded
    assert len(TrendStore(tmp_path / "trends.jsonl")) == 4

    bad = {
        "summary": "Backwards",
        "window_start": "2024-02-01",
        "window_end": "2024-01-01",
    }
    with pytest.raises(ValidationFailed) as e:
        store.ingest_trends([_trend("d"), bad, {"summary": "no window"}])
    assert set(e.value.reasons) == {1, 2}
    assert e.value.reasons[1] == ["window_start ≤ window_end"]
    # the batch is rejected as a whole
    assert len(store) == 4


def test_news_relevant_trends():
    store = TrendStore()
    with pytest.raises(EmptyStore):
        store.relevant_trends(Topic.from_name("Energy"), 2)

    store.ingest_trends(
        [
            _trend("Oil output cut", date(2024, 1, 10), ["energy"]),
            _trend("Solar installs boom", date(2024, 2, 10), ["energy"]),
            _trend("Wind auctions fail", date(2024, 1, 20), ["energy"]),
            _trend("Football transfer record", date(2024, 2, 11), ["sports"]),
        ]
    )
    topic = Topic.from_name("Energy")
    results = store.relevant_trends(topic, 2)
    assert [r.item.summary for r in results] == [
        "Solar installs boom",
        "Wind auctions fail",
    ]
    assert all(r.score == 1.0 for r in results)
    with pytest.raises(PreconditionError):
        store.relevant_trends(topic, 0)


TOKEN = re.compile(r"(?u)\b\w\w+\b")


def _tfidf_cosine(query: str, documents: list[str]) -> list[float]:
    docs = [Counter(TOKEN.findall(d.lower())) for d in documents]
    n = len(docs)
    vocab = sorted({t for d in docs for t in d})
    idf = {
        t: math.log((1 + n) / (1 + sum(1 for d in docs if t in d))) + 1 for t in vocab
    }

    def vector(counts):
        v = {t: c * idf[t] for t, c in counts.items() if t in idf}
        norm = math.sqrt(sum(x * x for x in v.values()))
        return {t: x / norm for t, x in v.items()} if norm else {}

    q = vector(Counter(TOKEN.findall(query.lower())))
    return [sum(q.get(t, 0) * x for t, x in vector(d).items()) for d in docs]


def test_news_relevance_oracle():
    trends = [
        _trend("Energy prices climb as gas storage shrinks", date(2024, 1, 5)),
        _trend("Renewable energy share reaches a record", date(2024, 1, 6)),
        _trend("Grid operators warn of energy energy shortages", date(2024, 1, 7)),
        _trend("Nuclear plant restarts", date(2024, 1, 8), ["energy"]),
        _trend("Stock markets rally", date(2024, 1, 9)),
        _trend("New smartphone launch", date(2024, 1, 10)),
    ]
    store = TrendStore()
    store.ingest_trends(trends)
    topic = Topic.from_name("Energy")
    results = store.relevant_trends(topic, 10)

    lexical = _tfidf_cosine(topic_query(topic), [t.summary for t in trends])
    expected = sorted(
        (
            (1.0 if "energy" in t.topic_tags else s, t)
            for t, s in zip(trends, lexical)
        ),
        key=lambda x: (-x[0], -x[1].window_end.toordinal(), x[1].slug),
    )
    assert [r.item.summary for r in results] == [t.summary for _, t in expected]
    for result, (score, _) in zip(results, expected):
        assert result.score == pytest.approx(score, abs=1e-9)
        assert 0 <= result.score <= 1


def test_news_search_sources():
    start = date(2024, 1, 1)
    headlines = [
        SourceHeadline(
            headline=f"Market update number {i}", published=start + timedelta(i)
        )
        for i in range(50)
    ]
    headlines.append(
        SourceHeadline(
            headline="Toyota wins Car of the Year", published=date(2024, 1, 3)
        )
    )
    news = News(TrendStore(), HeadlineStore(headlines))
    end = date(2024, 3, 1)
    results = news.search_sources("Toyota wins Car of the Year", (start, end), 5)
    assert results[0].headline == "Toyota wins Car of the Year"

    results = news.search_sources("market update", (start, end), 10)
    assert len(results) == 10
    later = (date(2025, 1, 1), date(2025, 2, 1))
    assert news.search_sources("market update", later, 10) == []

    with pytest.raises(PreconditionError):
        news.search_sources("", (start, start), 10)
    with pytest.raises(PreconditionError):
        news.search_sources("market", (date(2024, 2, 1), start), 10)
    with pytest.raises(EmptyStore):
        News(TrendStore(), HeadlineStore()).search_sources("x", (start, start), 1)


class FakeResponse:
    def __init__(self, status_code, data=None):
        self.status_code = status_code
        self.ok = status_code < 400
        self.data = data or {}

    def json(self):
        return self.data


def test_news_live_headlines(monkeypatch):
    settings = Settings(
        news_url="https://news.example.org/search",
        news_key="secret",
        news_retry_delay=0,
    )
    live = LiveHeadlines(settings)
    assert live.session.headers["Authorization"] == "Bearer secret"

    responses = [
        FakeResponse(503),
        FakeResponse(
            200,
            {
                "articles": [
                    {
                        "title": "GM battery plant",
                        "publishedAt": "2024-04-10T08:00:00Z",
                    },
                    {"headline": "Too late", "published": "2024-12-01"},
                    {"headline": "", "published": "2024-04-11"},
                    {"headline": "Scored", "published": "2024-04-12", "score": 0.4},
                ]
            },
        ),
    ]
    calls = []

    def get(url, params, timeout):
        calls.append(params)
        return responses.pop(0)

    monkeypatch.setattr(live.session, "get", get)
    results = live.search("battery plant", date(2024, 3, 1), date(2024, 9, 30), 10)
    assert len(calls) == 2
    assert calls[0] == {
        "q": "battery plant",
        "from": "2024-03-01",
        "to": "2024-09-30",
        "limit": 10,
    }
    assert [r.item.headline for r in results] == ["GM battery plant", "Scored"]
    assert results[0].score == 1.0
    assert results[1].score == 0.4

    monkeypatch.setattr(live.session, "get", lambda *a, **kw: FakeResponse(403))
    with pytest.raises(ProviderUnavailable):
        live.search("battery plant", date(2024, 3, 1), date(2024, 9, 30), 10)
