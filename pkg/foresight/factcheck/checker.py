import re
from datetime import date, timedelta
from typing import Literal

from anystore.logging import get_logger
from pydantic import BaseModel, ConfigDict

from foresight.exceptions import (
    EmptyStore,
    ForesightError,
    MalformedResponse,
    PreconditionError,
)
from foresight.llm.base import Gateway
from foresight.model import ForecastSpec, OutcomeRecord, SourceHeadline, Verdict
from foresight.news import News
from foresight.prompts import numbered, render
from foresight.settings import Settings

log = get_logger(__name__)

Purpose = Literal["outcome", "screening"]

RE_VERDICT = re.compile(r"^\s*VERDICT:\s*(.+)$", re.I | re.M)
RE_IMPOSSIBLE = re.compile(r"^\s*IMPOSSIBLE:\s*(yes|no)\b", re.I | re.M)
RE_EVIDENCE = re.compile(r"^\s*EVIDENCE:\s*(.*)$", re.I | re.M)
RE_NUMBER = re.compile(r"\d+")
NO_EVIDENCE = {"none", "no evidence", "(none)"}
REMINDER = (
    "\n\nREMINDER: cite the numbers of the sources supporting your verdict in "
    "the `EVIDENCE:` line, or answer `EVIDENCE: none` if there is no evidence."
)


class VerdictAnswer(BaseModel):
    model_config = ConfigDict(frozen=True)

    verdict: Verdict
    impossible: bool = False
    evidence: list[int] = []
    uncited: bool = False


def parse_verdict(text: str, n_sources: int) -> VerdictAnswer:
    """Read `VERDICT:`, `IMPOSSIBLE:` and `EVIDENCE:` lines. An answer
    citing no valid source number and lacking the explicit `none` marker is
    uncited."""
    m = RE_VERDICT.search(text)
    if m is None:
        raise MalformedResponse("Verdict answer lacks `VERDICT:`")
    try:
        verdict = Verdict.parse(m.group(1))
    except PreconditionError as e:
        raise MalformedResponse(str(e)) from e
    m = RE_IMPOSSIBLE.search(text)
    impossible = m is not None and m.group(1).lower() == "yes"
    m = RE_EVIDENCE.search(text)
    evidence: list[int] = []
    uncited = True
    if m is not None:
        value = m.group(1).strip().strip(".").lower()
        if value in NO_EVIDENCE:
            uncited = False
        else:
            evidence = sorted(
                {int(n) for n in RE_NUMBER.findall(value) if 1 <= int(n) <= n_sources}
            )
            uncited = not evidence
    return VerdictAnswer(
        verdict=verdict, impossible=impossible, evidence=evidence, uncited=uncited
    )


class FactChecker:
    """Three valued verdicts on whether a forecast event happened, from
    sources retrieved over the event window"""

    def __init__(
        self, gateway: Gateway, news: News, settings: Settings | None = None
    ) -> None:
        self.gateway = gateway
        self.news = news
        self.settings = settings or gateway.settings

    def _sources(
        self, spec: ForecastSpec, window: tuple[date, date]
    ) -> list[SourceHeadline]:
        try:
            return self.news.search_sources(
                spec.title, window, self.settings.sources_limit
            )
        except EmptyStore:
            log.warning("No headlines available", forecast_id=spec.id)
            return []
        except ForesightError as e:
            e.stage = e.stage or "sources"
            raise

    def _ask(
        self,
        spec: ForecastSpec,
        sources: list[SourceHeadline],
        window: tuple[date, date],
        as_of: date,
        purpose: Purpose,
    ) -> VerdictAnswer:
        prompt = render(
            "verdict",
            self.settings.prompt_version,
            mode=purpose,
            as_of=as_of.isoformat(),
            start=window[0].isoformat(),
            end=window[1].isoformat(),
            event=spec.title,
            description=spec.description,
            sources=numbered(f"{h.published} {h.headline}" for h in sources),
        )
        params = self.gateway.deterministic_params(top_alternatives=1)
        try:
            answer = parse_verdict(
                self.gateway.complete(prompt, params).full_text, len(sources)
            )
            if answer.uncited:
                log.warning("Uncited verdict, retrying", forecast_id=spec.id)
                text = self.gateway.complete(prompt + REMINDER, params).full_text
                answer = parse_verdict(text, len(sources))
        except ForesightError as e:
            e.stage = e.stage or "verdict"
            raise
        if answer.uncited:
            log.warning("Uncited verdict, inconclusive", forecast_id=spec.id)
            return VerdictAnswer(verdict=Verdict.INCONCLUSIVE, uncited=True)
        return answer

    def check(
        self, spec: ForecastSpec, as_of: date, purpose: Purpose = "outcome"
    ) -> OutcomeRecord:
        """Decide whether the event happened within its window as of
        `as_of`. A `did not happen` verdict for a window still open is
        downgraded to inconclusive unless the model asserts impossibility."""
        if as_of < spec.timeframe_start:
            raise PreconditionError(
                f"Cannot check `{spec.id}` before its window opens "
                f"({as_of} < {spec.timeframe_start})"
            )
        window = (spec.timeframe_start, min(as_of, spec.timeframe_end))
        sources = self._sources(spec, window)
        answer = self._ask(spec, sources, window, as_of, purpose)
        verdict = answer.verdict
        downgraded = False
        if (
            as_of < spec.timeframe_end
            and verdict is Verdict.DID_NOT_HAPPEN
            and not answer.impossible
        ):
            verdict, downgraded = Verdict.INCONCLUSIVE, True
        log.info(
            "Fact checked",
            forecast_id=spec.id,
            verdict=verdict.value,
            downgraded=downgraded,
            sources=len(sources),
        )
        return OutcomeRecord.from_verdict(
            spec.id,
            verdict,
            checked_at=as_of,
            purpose=purpose,
            evidence=answer.evidence,
            impossible=answer.impossible,
            uncited=answer.uncited,
            downgraded=downgraded,
        )

    def screen(self, spec: ForecastSpec) -> OutcomeRecord:
        """Check whether the event had already happened when the forecast was
        made, over sources predating `created_at`"""
        end = spec.created_at - timedelta(days=1)
        start = spec.created_at - timedelta(days=self.settings.screen_lookback_days)
        window = (start, end)
        sources = self._sources(spec, window)
        answer = self._ask(spec, sources, window, spec.created_at, "screening")
        log.info("Screened", forecast_id=spec.id, verdict=answer.verdict.value)
        return OutcomeRecord.from_verdict(
            spec.id,
            answer.verdict,
            checked_at=spec.created_at,
            purpose="screening",
            evidence=answer.evidence,
            impossible=answer.impossible,
            uncited=answer.uncited,
        )

    def screen_validity(self, spec: ForecastSpec) -> bool:
        """A forecast is invalid iff its event had already happened"""
        return self.screen(spec).verdict is not Verdict.HAPPENED
