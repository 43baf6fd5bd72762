from foresight.llm.base import Gateway
from foresight.llm.mock import MockGateway, RecordingGateway, save_fixture
from foresight.llm.model import (
    Completion,
    DecodingParams,
    TokenPosition,
    request_fingerprint,
)

__all__ = [
    "Completion",
    "DecodingParams",
    "Gateway",
    "MockGateway",
    "RecordingGateway",
    "TokenPosition",
    "request_fingerprint",
    "save_fixture",
]
