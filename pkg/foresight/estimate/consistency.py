import math
import re

from anystore.logging import get_logger
from pydantic import BaseModel, ConfigDict

from foresight.exceptions import MalformedResponse, PreconditionError
from foresight.llm.base import Gateway
from foresight.model import SourceHeadline
from foresight.prompts import bullets, render

log = get_logger(__name__)

RE_EXCLUSIVE = re.compile(r"^\s*EXCLUSIVE:\s*(yes|no)\b", re.I | re.M)
RE_SET = re.compile(r"^\s*SET:\s*(.*)$", re.I | re.M)
NONE_LABELS = {"", "none", "n/a", "-"}


class OutcomeSet(BaseModel):
    """Forecasts sharing an exclusivity label: at most one can happen"""

    model_config = ConfigDict(frozen=True)

    label: str
    members: list[tuple[str, float]]

    def violations(self) -> list[str]:
        errors = []
        if len(self.members) < 2:
            errors.append("at least 2 members")
        ids = [forecast_id for forecast_id, _ in self.members]
        if len(set(ids)) != len(ids):
            errors.append("member ids distinct")
        if not all(0 <= p <= 1 for _, p in self.members):
            errors.append("all p_hat in [0,1]")
        return errors


def renormalize(outcomes: OutcomeSet) -> list[tuple[str, float]]:
    """Scale the probabilities of an exclusive set proportionally so that
    they sum to at most 1. Sets already summing to ≤ 1 stay unchanged
    (they may be non exhaustive). Order follows the input."""
    total = math.fsum(p for _, p in outcomes.members)
    if total <= 1:
        return list(outcomes.members)
    return [(forecast_id, p / total) for forecast_id, p in outcomes.members]


def parse_exclusivity(text: str) -> tuple[bool, str | None]:
    m = RE_EXCLUSIVE.search(text)
    if m is None:
        raise MalformedResponse("Exclusivity answer lacks `EXCLUSIVE: yes|no`")
    is_exclusive = m.group(1).lower() == "yes"
    label = None
    m = RE_SET.search(text)
    if m is not None and m.group(1).strip().lower() not in NONE_LABELS:
        label = m.group(1).strip()
    if is_exclusive and label is None:
        raise MalformedResponse("Exclusive event without a `SET:` label")
    if not is_exclusive:
        label = None
    return is_exclusive, label


def detect_exclusive(
    gateway: Gateway,
    event_text: str,
    context: list[SourceHeadline],
    version: str = "v1",
) -> tuple[bool, str | None]:
    """Classify an event as one of several mutually exclusive outcomes

    Returns:
        (is_exclusive, set label or None)
    """
    if not event_text or not event_text.strip():
        raise PreconditionError("Event text must not be empty")
    prompt = render(
        "exclusivity",
        version,
        event=event_text.strip(),
        context=bullets(h.headline for h in context),
    )
    params = gateway.deterministic_params(top_alternatives=1)
    completion = gateway.complete(prompt, params)
    is_exclusive, label = parse_exclusivity(completion.full_text)
    log.debug(
        "Detected exclusivity", event=event_text, exclusive=is_exclusive, set=label
    )
    return is_exclusive, label
