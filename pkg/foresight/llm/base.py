from abc import ABC, abstractmethod

from anystore.logging import get_logger

from foresight.exceptions import PreconditionError
from foresight.llm.model import Completion, DecodingParams, request_fingerprint
from foresight.settings import Settings
from foresight.util import with_retries

log = get_logger(__name__)


class Gateway(ABC):
    """Chat completion interface returning token alternatives with their
    log probabilities. Implementations must be safe for concurrent calls."""

    name: str = "gateway"

    def __init__(self, settings: Settings | None = None) -> None:
        self.settings = settings or Settings()

    def deterministic_params(self, **overrides) -> DecodingParams:
        """Decoding parameters maximizing determinism for this provider:
        minimal temperature and top_p, maximal number of alternatives"""
        data = {
            "temperature": self.settings.llm_min_temperature,
            "top_p": self.settings.llm_min_top_p,
            "max_tokens": self.settings.llm_max_tokens,
            "top_alternatives": self.settings.llm_max_alternatives,
        }
        data.update(overrides)
        return DecodingParams(**data)

    def complete(self, prompt: str, params: DecodingParams) -> Completion:
        if not prompt or not prompt.strip():
            raise PreconditionError("Prompt must not be empty")
        fingerprint = request_fingerprint(prompt, params)
        return with_retries(
            lambda: self._complete(prompt, params, fingerprint),
            max_retries=self.settings.llm_max_retries,
            delay=self.settings.llm_retry_delay,
            name=f"{self.name} completion",
        )

    @abstractmethod
    def _complete(
        self, prompt: str, params: DecodingParams, fingerprint: str
    ) -> Completion:
        raise NotImplementedError
