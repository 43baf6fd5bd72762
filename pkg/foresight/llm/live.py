from typing import Any

import openai
from anystore.logging import get_logger
from anystore.util import mask_uri

from foresight.exceptions import (
    GatewayError,
    MissingLogprobs,
    PreconditionError,
    RateLimited,
    TransportError,
)
from foresight.llm.base import Gateway
from foresight.llm.model import Completion, DecodingParams, TokenPosition
from foresight.settings import Settings

log = get_logger(__name__)

# upper bound of the chat completions api for `top_logprobs`
MAX_TOP_LOGPROBS = 20


def _retry_after(error: openai.APIStatusError) -> float | None:
    value = error.response.headers.get("retry-after")
    try:
        return float(value) if value is not None else None
    except ValueError:
        return None


def get_positions(choice: Any) -> list[TokenPosition]:
    """Token positions from a chat completion choice. Positions without
    alternatives are synthesized from the chosen token's own logprob."""
    if choice.logprobs is None or not choice.logprobs.content:
        raise MissingLogprobs(
            "Provider returned no token logprobs (is `logprobs` supported?)"
        )
    positions = []
    for token_logprobs in choice.logprobs.content:
        alternatives = [
            (top.token, top.logprob) for top in token_logprobs.top_logprobs or []
        ]
        if token_logprobs.token not in {t for t, _ in alternatives}:
            alternatives.append((token_logprobs.token, token_logprobs.logprob))
        positions.append(TokenPosition.make(token_logprobs.token, alternatives))
    return positions


class OpenAIGateway(Gateway):
    """OpenAI compatible chat completion endpoint with `logprobs` support"""

    name = "openai"

    def __init__(self, settings: Settings | None = None) -> None:
        super().__init__(settings)
        if self.settings.llm_key is None:
            raise PreconditionError("No api key configured (`FORESIGHT_LLM_KEY`)")
        self.client = openai.OpenAI(
            api_key=self.settings.llm_key.get_secret_value(),
            base_url=self.settings.llm_base_url,
            timeout=self.settings.llm_timeout,
            max_retries=0,
        )
        log.info(
            "Configured language model",
            model=self.settings.llm_model,
            base_url=mask_uri(self.settings.llm_base_url or "default"),
        )

    def _complete(
        self, prompt: str, params: DecodingParams, fingerprint: str
    ) -> Completion:
        try:
            response = self.client.chat.completions.create(
                model=self.settings.llm_model,
                messages=[{"role": "user", "content": prompt}],
                temperature=params.temperature,
                top_p=params.top_p,
                max_tokens=params.max_tokens,
                logprobs=True,
                top_logprobs=min(params.top_alternatives, MAX_TOP_LOGPROBS),
                stream=False,
            )
        except openai.RateLimitError as e:
            raise RateLimited(str(e), retry_after=_retry_after(e)) from e
        except (openai.APIConnectionError, openai.InternalServerError) as e:
            raise TransportError(str(e)) from e
        except openai.APIStatusError as e:
            raise GatewayError(f"Provider error {e.status_code}: {e.message}") from e
        if not response.choices:
            raise TransportError("Provider returned no choices")
        positions = get_positions(response.choices[0])
        return Completion.from_positions(positions, self.name, fingerprint)
