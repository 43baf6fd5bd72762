"""Fixture backed gateway for offline runs and tests.

A fixture file (`*.json` below `<mock_fixtures_dir>/llm/`) holds one rule or
a list of rules:

    {"fingerprint": "<sha256>", "completion": {<Completion>}}
    {"match": ["substring", ...], "text": "full answer"}
    {"match": [...], "tokens": ["Probability: ", {"token": "35",
        "alternatives": [["35", -0.5], ["40", -1.2]]}, "\\n"]}

Fingerprint rules replay an exact request. Otherwise the rule whose `match`
substrings all occur in the prompt wins; more substrings is more specific,
ties go to the earlier rule (files in name order).
"""

import threading
from pathlib import Path
from typing import Any

from anystore.io import smart_read, smart_write
from anystore.logging import get_logger
from banal import ensure_list
from pydantic import BaseModel

from foresight.exceptions import MissingFixture, PreconditionError
from foresight.llm.base import Gateway
from foresight.llm.model import Completion, DecodingParams, TokenPosition
from foresight.settings import Settings
from foresight.util import canonical_json

log = get_logger(__name__)


class Rule(BaseModel):
    match: list[str] = []
    positions: list[TokenPosition]
    source: str = ""

    @property
    def specificity(self) -> int:
        return len(self.match)

    def matches(self, prompt: str) -> bool:
        return all(term in prompt for term in self.match)


def _make_position(token: str | dict[str, Any]) -> TokenPosition:
    if isinstance(token, str):
        return TokenPosition.make(token)
    alternatives = [(str(t), float(lp)) for t, lp in token.get("alternatives", [])]
    return TokenPosition.make(token["token"], alternatives)


def load_rules(path: Path) -> tuple[dict[str, Completion], list[Rule]]:
    fingerprints: dict[str, Completion] = {}
    rules: list[Rule] = []
    directory = path / "llm" if (path / "llm").is_dir() else path
    for fp in sorted(directory.glob("*.json")):
        for data in ensure_list(smart_read(fp, serialization_mode="json")):
            if "fingerprint" in data:
                completion = Completion.model_validate(data["completion"])
                fingerprints[data["fingerprint"]] = completion
                continue
            if "tokens" in data:
                positions = [_make_position(t) for t in data["tokens"]]
            elif "text" in data:
                positions = [TokenPosition.make(data["text"])]
            else:
                raise PreconditionError(f"Invalid mock rule in `{fp}`")
            rules.append(
                Rule(
                    match=ensure_list(data.get("match")),
                    positions=positions,
                    source=fp.name,
                )
            )
    log.info(
        "Loaded mock fixtures",
        directory=str(directory),
        fingerprints=len(fingerprints),
        rules=len(rules),
    )
    return fingerprints, rules


def _trim(position: TokenPosition, k: int) -> TokenPosition:
    """Keep the top `k` alternatives, but never drop the chosen token"""
    tokens = [t for t, _ in position.alternatives]
    keep = max(k, tokens.index(position.chosen_token) + 1)
    if keep >= len(tokens):
        return position
    return TokenPosition(
        chosen_token=position.chosen_token, alternatives=position.alternatives[:keep]
    )


class MockGateway(Gateway):
    name = "mock"

    def __init__(
        self, directory: Path | str | None = None, settings: Settings | None = None
    ) -> None:
        super().__init__(settings)
        directory = directory or self.settings.mock_fixtures_dir
        if directory is None:
            raise PreconditionError("No mock fixtures directory configured")
        self.directory = Path(directory)
        self.fingerprints, self.rules = load_rules(self.directory)
        self.calls: list[dict[str, Any]] = []
        self._lock = threading.Lock()

    def _complete(
        self, prompt: str, params: DecodingParams, fingerprint: str
    ) -> Completion:
        with self._lock:
            self.calls.append({"prompt": prompt, "params": params})
        if fingerprint in self.fingerprints:
            return self.fingerprints[fingerprint]
        rule = self.find_rule(prompt)
        positions = [_trim(p, params.top_alternatives) for p in rule.positions]
        return Completion.from_positions(positions, self.name, fingerprint)

    def find_rule(self, prompt: str) -> Rule:
        best: Rule | None = None
        for rule in self.rules:
            if rule.matches(prompt):
                if best is None or rule.specificity > best.specificity:
                    best = rule
        if best is None:
            head = prompt.strip().splitlines()[0][:80]
            raise MissingFixture(f"No mock fixture matches prompt: `{head} ...`")
        return best


def save_fixture(directory: Path | str, prompt: str, completion: Completion) -> Path:
    """Store a completion as a fingerprint keyed fixture for exact replay"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{completion.request_fingerprint}.json"
    data = {
        "fingerprint": completion.request_fingerprint,
        "prompt": prompt,
        "completion": completion.model_dump(mode="json"),
    }
    smart_write(path, canonical_json(data))
    return path


class RecordingGateway(Gateway):
    """Wrap a gateway and record every completion as a replay fixture"""

    def __init__(self, inner: Gateway, directory: Path | str) -> None:
        super().__init__(inner.settings)
        self.inner = inner
        self.name = inner.name
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def complete(self, prompt: str, params: DecodingParams) -> Completion:
        completion = self.inner.complete(prompt, params)
        path = save_fixture(self.directory, prompt, completion)
        log.debug("Recorded completion", path=str(path))
        return completion

    def _complete(
        self, prompt: str, params: DecodingParams, fingerprint: str
    ) -> Completion:
        return self.inner._complete(prompt, params, fingerprint)
