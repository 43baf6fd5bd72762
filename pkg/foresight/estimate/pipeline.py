import re
from contextlib import contextmanager
from datetime import date, timedelta
from typing import Any, Generator

from anystore.logging import get_logger
from anystore.util import Took
from pydantic import BaseModel, ConfigDict

from foresight.estimate.consistency import detect_exclusive
from foresight.estimate.estimator import (
    AnchorPolicy,
    aggregate,
    extract_guesses,
    top_value,
)
from foresight.exceptions import (
    EmptyStore,
    ForesightError,
    MalformedResponse,
    PreconditionError,
)
from foresight.llm.base import Gateway
from foresight.model import (
    EstimateResult,
    ForecastSpec,
    SourceHeadline,
    Topic,
    ensure_valid,
    make_slug,
)
from foresight.news import News
from foresight.prompts import bullets, render, template_id
from foresight.settings import Settings
from foresight.util import make_hash

log = get_logger(__name__)

STAGES = ("reformulate", "trends", "sources", "key_events", "exclusivity", "estimate")
OTHER = "other"

RE_EVENT = re.compile(r"^\s*EVENT:\s*(.+)$", re.M)
RE_CATEGORY = re.compile(r"^\s*CATEGORY:\s*(.+)$", re.M)
RE_BULLET = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s+(.+)$")
RE_SECTION = re.compile(r"^\s*([A-Za-z][A-Za-z ]*):(.*)$")
NONE_ITEMS = {"none", "(none)", "n/a", "-"}


class StageTrace(BaseModel):
    model_config = ConfigDict(frozen=True)

    forecast_id: str
    index: int
    stage: str
    input_hash: str
    output_hash: str


def parse_sections(text: str) -> tuple[list[str], list[str]]:
    """Bullet items of the `SUPPORTING:` and `OPPOSING:` sections. Absent
    sections yield empty lists."""
    sections: dict[str, list[str]] = {"SUPPORTING": [], "OPPOSING": []}
    current: list[str] | None = None
    for line in text.splitlines():
        bullet = RE_BULLET.match(line)
        if bullet is not None:
            item = bullet.group(1).strip()
            if current is not None and item.lower() not in NONE_ITEMS:
                current.append(item)
            continue
        m = RE_SECTION.match(line)
        if m is not None:
            current = sections.get(m.group(1).strip().upper())
            inline = m.group(2).strip()
            if current is not None and inline and inline.lower() not in NONE_ITEMS:
                current.append(inline)
        elif not line.strip():
            continue
        else:
            current = None
    return sections["SUPPORTING"], sections["OPPOSING"]


class Pipeline:
    """Estimate the probability of a forecast: reformulate the event, collect
    trends, sources and key events, check exclusivity and aggregate the
    answer token alternatives of the estimation completion."""

    def __init__(
        self, gateway: Gateway, news: News, settings: Settings | None = None
    ) -> None:
        self.gateway = gateway
        self.news = news
        self.settings = settings or gateway.settings

    @property
    def version(self) -> str:
        return self.settings.prompt_version

    @property
    def policy(self) -> AnchorPolicy:
        return AnchorPolicy(
            answer_pattern=self.settings.anchor_marker,
            parse_mode=self.settings.anchor_mode,  # type: ignore[arg-type]
        )

    @property
    def categories(self) -> list[str]:
        return [*self.settings.topics, OTHER]

    def _ask(self, prompt: str) -> str:
        params = self.gateway.deterministic_params(top_alternatives=1)
        return self.gateway.complete(prompt, params).full_text

    def reformulate(self, query: str) -> tuple[str, str]:
        """Correct the spelling of an event and categorize it

        Returns:
            (normalized event, category of the topic taxonomy or "other")
        """
        if not query or not query.strip():
            raise PreconditionError("Query must not be empty")
        text = self._ask(
            render(
                "reformulate",
                self.version,
                query=query.strip(),
                categories=", ".join(self.categories),
            )
        )
        m = RE_EVENT.search(text)
        if m is None:
            raise MalformedResponse("Reformulation lacks `EVENT:`")
        event = m.group(1).strip()
        category = OTHER
        m = RE_CATEGORY.search(text)
        if m is not None:
            wanted = make_slug(m.group(1))
            for name in self.categories:
                if make_slug(name) == wanted:
                    category = name
                    break
            else:
                log.warning("Unknown category", category=m.group(1).strip())
        return event, category

    def extract_key_events(self, headlines: list[SourceHeadline]) -> list[str]:
        """The most important events of the headlines, at most
        `key_events_max`. No model call for empty input."""
        if not headlines:
            return []
        limit = self.settings.key_events_max
        text = self._ask(
            render(
                "key_events",
                self.version,
                max=limit,
                headlines=bullets(h.headline for h in headlines),
            )
        )
        events = []
        for line in text.splitlines():
            m = RE_BULLET.match(line)
            if m is not None and m.group(1).strip().lower() not in NONE_ITEMS:
                events.append(m.group(1).strip())
        return events[:limit]

    @contextmanager
    def _stage(
        self, spec: ForecastSpec, name: str, traces: list[StageTrace], inputs: Any
    ) -> Generator[dict[str, Any], None, None]:
        outputs: dict[str, Any] = {}
        with Took() as t:
            try:
                yield outputs
            except ForesightError as e:
                if e.stage is None:
                    e.stage = name
                log.error("Stage failed", forecast_id=spec.id, stage=name, error=str(e))
                raise
        traces.append(
            StageTrace(
                forecast_id=spec.id,
                index=len(traces) + 1,
                stage=name,
                input_hash=make_hash(inputs),
                output_hash=make_hash(outputs),
            )
        )
        log.debug("Stage done", forecast_id=spec.id, stage=name, took=t.took)

    def estimate_traced(
        self, spec: ForecastSpec, as_of: date | None = None
    ) -> tuple[EstimateResult, list[StageTrace]]:
        ensure_valid(spec)
        as_of = as_of or spec.created_at
        traces: list[StageTrace] = []

        with self._stage(spec, "reformulate", traces, {"query": spec.title}) as out:
            event, category = self.reformulate(spec.title)
            out.update(event=event, category=category)

        topic = Topic.from_slug(spec.topic, self.settings.topics)
        with self._stage(spec, "trends", traces, {"topic": topic}) as out:
            try:
                scored = self.news.relevant_trends(topic, self.settings.estimate_trends)
            except EmptyStore:
                log.warning("No trends to estimate with", forecast_id=spec.id)
                scored = []
            trends = [s.item.summary for s in scored]  # type: ignore[union-attr]
            out.update(trends=trends)

        window = (as_of - timedelta(days=self.settings.sources_window_days), as_of)
        with self._stage(
            spec, "sources", traces, {"query": event, "window": window}
        ) as out:
            try:
                sources = self.news.search_sources(
                    event, window, self.settings.sources_limit
                )
            except EmptyStore:
                log.warning("No headlines available", forecast_id=spec.id)
                sources = []
            out.update(sources=sources)
        if not sources:
            log.warning("No sources found", forecast_id=spec.id, event=event)

        with self._stage(spec, "key_events", traces, {"sources": sources}) as out:
            key_events = self.extract_key_events(sources)
            out.update(key_events=key_events)

        with self._stage(
            spec, "exclusivity", traces, {"event": event, "sources": sources}
        ) as out:
            is_exclusive, set_label = detect_exclusive(
                self.gateway, event, sources, self.version
            )
            out.update(is_exclusive=is_exclusive, set_label=set_label)

        prompt = render(
            "estimate",
            self.version,
            as_of=as_of.isoformat(),
            start=spec.timeframe_start.isoformat(),
            end=spec.timeframe_end.isoformat(),
            event=event,
            description=spec.description,
            category=category,
            trends=bullets(trends),
            key_events=bullets(key_events),
        )
        with self._stage(spec, "estimate", traces, {"prompt": prompt}) as out:
            completion = self.gateway.complete(
                prompt, self.gateway.deterministic_params()
            )
            guesses = extract_guesses(completion, self.policy)
            top = top_value(completion, self.policy)
            p_hat, u_hat = aggregate(guesses)
            positive, negative = parse_sections(completion.full_text)
            out.update(completion=completion, p_hat=p_hat, u_hat=u_hat, top=top)

        result = EstimateResult(
            forecast_id=spec.id,
            p_hat=p_hat,
            u_hat=u_hat,
            guesses=guesses,
            top_value=top,
            positive_trends=positive,
            negative_trends=negative,
            estimated_at=as_of,
            normalized_event=event,
            category=category,
            key_events=key_events,
            is_exclusive=is_exclusive,
            set_label=set_label,
            sources_empty=not sources,
            template=template_id("estimate", self.version),
        )
        log.info(
            "Estimated",
            forecast_id=spec.id,
            p_hat=round(p_hat, 4),
            u_hat=round(u_hat, 4),
            guesses=len(guesses),
        )
        return result, traces

    def estimate(self, spec: ForecastSpec, as_of: date | None = None) -> EstimateResult:
        result, _ = self.estimate_traced(spec, as_of)
        return result
