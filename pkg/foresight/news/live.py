from datetime import date

import requests
from anystore.logging import get_logger
from pydantic import ValidationError

from foresight.exceptions import PreconditionError, ProviderUnavailable, TransportError
from foresight.model import RelevanceScoredItem, SourceHeadline, validate
from foresight.settings import Settings
from foresight.util import with_retries

log = get_logger(__name__)


class LiveHeadlines:
    """HTTP JSON news search endpoint.

    Expects `GET <news_url>?q=..&from=..&to=..&limit=..` to answer with
    `{"articles": [{"headline", "published", "origin", "score"?}, ...]}`,
    most relevant first.
    """

    def __init__(self, settings: Settings | None = None) -> None:
        self.settings = settings or Settings()
        if not self.settings.news_url:
            raise PreconditionError("No news provider configured (`news_url`)")
        self.session = requests.Session()
        if self.settings.news_key is not None:
            key = self.settings.news_key.get_secret_value()
            self.session.headers["Authorization"] = f"Bearer {key}"

    def _request(self, params: dict[str, str | int]) -> list[dict]:
        try:
            res = self.session.get(
                self.settings.news_url,  # type: ignore[arg-type]
                params=params,
                timeout=self.settings.news_timeout,
            )
        except requests.RequestException as e:
            raise TransportError(str(e)) from e
        if res.status_code == 429 or res.status_code >= 500:
            raise TransportError(f"News provider returned {res.status_code}")
        if not res.ok:
            raise ProviderUnavailable(f"News provider returned {res.status_code}")
        return res.json().get("articles", [])

    def search(
        self, query: str, start: date, end: date, limit: int
    ) -> list[RelevanceScoredItem]:
        params: dict[str, str | int] = {
            "q": query,
            "from": start.isoformat(),
            "to": end.isoformat(),
            "limit": limit,
        }
        try:
            articles = with_retries(
                lambda: self._request(params),
                max_retries=self.settings.llm_max_retries,
                delay=self.settings.news_retry_delay,
                name="news search",
            )
        except TransportError as e:
            raise ProviderUnavailable(str(e)) from e
        results = []
        for ix, article in enumerate(articles[:limit]):
            try:
                headline = SourceHeadline(
                    headline=article.get("headline") or article.get("title") or "",
                    published=str(
                        article.get("published") or article.get("publishedAt") or ""
                    )[:10],
                    origin=article.get("origin") or article.get("source") or "",
                )
            except ValidationError as e:
                log.warning("Skipping invalid article", error=str(e))
                continue
            errors = validate(headline)
            if errors:
                log.warning("Skipping invalid article", errors=errors)
                continue
            if not start <= headline.published <= end:
                continue
            # providers rank but may not score; fall back to the rank
            score = article.get("score", 1 / (ix + 1))
            score = min(max(score, 0), 1)
            results.append(RelevanceScoredItem(item=headline, score=score))
        return results
