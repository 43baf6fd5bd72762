import re
from datetime import date

from anystore.logging import get_logger
from anystore.util import Took
from pydantic import BaseModel, ConfigDict

from foresight.exceptions import (
    EmptyStore,
    MalformedGeneration,
    PreconditionError,
    ValidationFailed,
)
from foresight.llm.base import Gateway
from foresight.model import ForecastSpec, Topic, ensure_valid
from foresight.news import News
from foresight.prompts import bullets, render, template_id
from foresight.settings import Settings

log = get_logger(__name__)

BLOCK = "FORECAST"
FIELDS = ("TITLE", "DESCRIPTION", "START", "END")
RE_FIELD = re.compile(r"^(TITLE|DESCRIPTION|START|END):(.*)$")
REMINDER = (
    "\n\nREMINDER: your previous answer could not be read. Answer only with "
    "blocks starting with a line `FORECAST`, followed by `TITLE:`, "
    "`DESCRIPTION:`, `START:` and `END:` lines, dates as YYYY-MM-DD."
)


class ForecastFields(BaseModel):
    model_config = ConfigDict(frozen=True)

    title: str
    description: str
    timeframe_start: date
    timeframe_end: date


def _finalize(block: dict[str, str], start_line: int) -> ForecastFields:
    for key in FIELDS:
        if not block.get(key, "").strip():
            raise MalformedGeneration(f"Forecast lacks `{key}`", position=start_line)
    try:
        start = date.fromisoformat(block["START"].strip())
        end = date.fromisoformat(block["END"].strip())
    except ValueError as e:
        raise MalformedGeneration(f"Invalid date: {e}", position=start_line) from e
    return ForecastFields(
        title=block["TITLE"].strip(),
        description=block["DESCRIPTION"].strip(),
        timeframe_start=start,
        timeframe_end=end,
    )


def parse_generation(raw: str) -> list[ForecastFields]:
    """Parse `FORECAST` blocks. Text before the first block is ignored,
    description lines may continue over several lines."""
    if not raw or not raw.strip():
        raise PreconditionError("Generation output must not be empty")
    results: list[ForecastFields] = []
    block: dict[str, str] | None = None
    block_line = 0
    current: str | None = None
    for lineno, line in enumerate(raw.splitlines(), 1):
        line = line.rstrip()
        if line.strip() == BLOCK:
            if block is not None:
                results.append(_finalize(block, block_line))
            block, block_line, current = {}, lineno, None
            continue
        if block is None:
            continue
        m = RE_FIELD.match(line)
        if m is not None:
            key, value = m.group(1), m.group(2).strip()
            if key in block:
                raise MalformedGeneration(f"Duplicate `{key}`", position=lineno)
            block[key] = value
            current = key
        elif current == "DESCRIPTION":
            block[current] += "\n" + line
        elif line.strip():
            raise MalformedGeneration(f"Unexpected line: `{line}`", position=lineno)
    if block is not None:
        results.append(_finalize(block, block_line))
    if not results:
        raise MalformedGeneration("No `FORECAST` block found", position=1)
    return results


def render_generation(items: list[ForecastFields | ForecastSpec]) -> str:
    blocks = []
    for item in items:
        blocks.append(
            "\n".join(
                (
                    BLOCK,
                    f"TITLE: {item.title}",
                    f"DESCRIPTION: {item.description}",
                    f"START: {item.timeframe_start.isoformat()}",
                    f"END: {item.timeframe_end.isoformat()}",
                )
            )
        )
    return "\n\n".join(blocks) + "\n"


class ForecastGenerator:
    def __init__(
        self, gateway: Gateway, news: News, settings: Settings | None = None
    ) -> None:
        self.gateway = gateway
        self.news = news
        self.settings = settings or gateway.settings

    def _make_specs(
        self, raw: str, topic: Topic, n: int, as_of: date, seeds: list[str]
    ) -> list[ForecastSpec]:
        fields = parse_generation(raw)
        if len(fields) < n:
            raise MalformedGeneration(f"Expected {n} forecasts, got {len(fields)}")
        specs: list[ForecastSpec] = []
        for item in fields[:n]:
            if item.timeframe_start < as_of:
                raise MalformedGeneration(
                    f"Retroactive forecast `{item.title}` starts {item.timeframe_start}"
                )
            spec = ForecastSpec.create(
                topic=topic.slug,
                created_at=as_of,
                seed_trends=seeds,
                template=template_id("generate", self.settings.prompt_version),
                **item.model_dump(),
            )
            try:
                ensure_valid(spec)
            except ValidationFailed as e:
                raise MalformedGeneration(f"Invalid forecast `{item.title}`: {e}")
            if spec.id in {s.id for s in specs}:
                raise MalformedGeneration(f"Duplicate forecast `{item.title}`")
            specs.append(spec)
        return specs

    def generate_forecasts(
        self, topic: Topic, n: int, as_of: date
    ) -> list[ForecastSpec]:
        """Generate `n` candidate events for a topic, grounded in its most
        relevant trends. Parse failures are retried once with a format
        reminder."""
        if n < 1:
            raise PreconditionError("n must be positive")
        try:
            trends = self.news.relevant_trends(topic, self.settings.generation_trends)
        except EmptyStore:
            log.warning(
                "No trends, generating from background knowledge", topic=topic.slug
            )
            trends = []
        seeds = [t.item.summary for t in trends]  # type: ignore[union-attr]
        prompt = render(
            "generate",
            self.settings.prompt_version,
            as_of=as_of.isoformat(),
            n=n,
            topic=topic.name,
            trends=bullets(seeds),
        )
        params = self.gateway.deterministic_params(top_alternatives=1)
        error: MalformedGeneration | None = None
        with Took() as t:
            for attempt, suffix in enumerate(("", REMINDER), 1):
                completion = self.gateway.complete(prompt + suffix, params)
                try:
                    specs = self._make_specs(
                        completion.full_text, topic, n, as_of, seeds
                    )
                except MalformedGeneration as e:
                    log.warning("Malformed generation", attempt=attempt, error=str(e))
                    error = e
                    continue
                log.info("Generated forecasts", topic=topic.slug, n=n, took=t.took)
                return specs
        assert error is not None
        raise error
