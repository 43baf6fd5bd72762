import hashlib
import time
from datetime import date, datetime, timezone
from typing import Any, Callable, TypeVar

import orjson
from anystore.logging import get_logger
from pydantic import BaseModel

from foresight.exceptions import RETRYABLE, PreconditionError, RateLimited

log = get_logger(__name__)

T = TypeVar("T")


def _default(obj: Any) -> Any:
    if isinstance(obj, BaseModel):
        return obj.model_dump(mode="json")
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    raise TypeError(f"Cannot serialize `{type(obj).__name__}`")


def canonical_json(data: Any) -> bytes:
    """Stable JSON bytes: sorted keys, no whitespace, ISO dates."""
    if isinstance(data, BaseModel):
        data = data.model_dump(mode="json")
    return orjson.dumps(
        data, default=_default, option=orjson.OPT_SORT_KEYS | orjson.OPT_NON_STR_KEYS
    )


def make_hash(*parts: Any) -> str:
    """sha256 hex digest over the canonical json of the given parts"""
    m = hashlib.sha256()
    for part in parts:
        if isinstance(part, bytes):
            m.update(part)
        elif isinstance(part, str):
            m.update(part.encode("utf-8"))
        else:
            m.update(canonical_json(part))
        m.update(b"\x1f")
    return m.hexdigest()


def ensure_date(value: date | datetime | str | None) -> date | None:
    if value is None:
        return None
    if isinstance(value, datetime):
        return value.date()
    if isinstance(value, date):
        return value
    try:
        return date.fromisoformat(value.strip())
    except ValueError as e:
        raise PreconditionError(f"Invalid date: `{value}`") from e


def utcnow() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


def with_retries(
    func: Callable[[], T],
    max_retries: int,
    delay: float,
    name: str = "request",
) -> T:
    """Call `func`, retrying on retryable gateway errors with exponential
    backoff. `max_retries` counts retries, not attempts."""
    attempt = 0
    while True:
        try:
            return func()
        except RETRYABLE as e:
            if attempt >= max_retries:
                raise
            wait = delay * (2**attempt)
            if isinstance(e, RateLimited) and e.retry_after is not None:
                wait = max(wait, e.retry_after)
            attempt += 1
            log.warning(
                f"{name} failed, retrying ...",
                attempt=attempt,
                max_retries=max_retries,
                wait=wait,
                error=str(e),
            )
            if wait > 0:
                time.sleep(wait)
