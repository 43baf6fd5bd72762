import math
from typing import Self

from pydantic import BaseModel, ConfigDict, Field, model_validator

from foresight.util import make_hash


class DecodingParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    temperature: float = Field(default=0.0, ge=0)
    top_p: float = Field(default=1.0, gt=0, le=1)
    max_tokens: int = Field(default=512, gt=0)
    top_alternatives: int = Field(default=1, ge=1)
    """How many alternative tokens per position to request"""


class TokenPosition(BaseModel):
    model_config = ConfigDict(frozen=True)

    chosen_token: str
    alternatives: list[tuple[str, float]]

    @model_validator(mode="after")
    def check_alternatives(self) -> Self:
        if not self.alternatives:
            raise ValueError("alternatives must not be empty")
        logprobs = [lp for _, lp in self.alternatives]
        if not all(math.isfinite(lp) and lp <= 0 for lp in logprobs):
            raise ValueError("alternative logprobs must be finite and ≤ 0")
        if any(a < b for a, b in zip(logprobs, logprobs[1:])):
            raise ValueError("alternatives must be sorted descending by logprob")
        if self.chosen_token not in {token for token, _ in self.alternatives}:
            raise ValueError(f"chosen token `{self.chosen_token}` not in alternatives")
        return self

    @classmethod
    def make(
        cls, chosen_token: str, alternatives: list[tuple[str, float]] | None = None
    ) -> Self:
        """Build a position from unsorted alternatives. Without alternatives
        the chosen token is the only (certain) alternative."""
        if not alternatives:
            alternatives = [(chosen_token, 0.0)]
        alternatives = [(t, min(float(lp), 0.0)) for t, lp in alternatives]
        # stable: equal logprobs keep their given order
        alternatives = sorted(alternatives, key=lambda a: -a[1])
        return cls(chosen_token=chosen_token, alternatives=alternatives)


class Completion(BaseModel):
    model_config = ConfigDict(frozen=True)

    full_text: str
    positions: list[TokenPosition]
    provider_name: str
    request_fingerprint: str

    @model_validator(mode="after")
    def check_text(self) -> Self:
        if "".join(p.chosen_token for p in self.positions) != self.full_text:
            raise ValueError("chosen tokens do not concatenate to full_text")
        return self

    @classmethod
    def from_positions(
        cls, positions: list[TokenPosition], provider_name: str, fingerprint: str
    ) -> Self:
        return cls(
            full_text="".join(p.chosen_token for p in positions),
            positions=positions,
            provider_name=provider_name,
            request_fingerprint=fingerprint,
        )


def request_fingerprint(prompt: str, params: DecodingParams) -> str:
    return make_hash({"prompt": prompt, "params": params})
