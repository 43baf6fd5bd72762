"""Error families of the engine. Every error maps onto one command line
exit code; pipeline stages annotate errors with their `stage` name."""

from typing import Any


class ForesightError(Exception):
    exit_code: int = 1

    def __init__(self, message: str = "", stage: str | None = None) -> None:
        super().__init__(message)
        self.message = message
        self.stage = stage

    def __str__(self) -> str:
        if self.stage:
            return f"[{self.stage}] {self.message}"
        return self.message


# usage (1)


class PreconditionError(ForesightError, ValueError):
    exit_code = 1


class ValidationFailed(ForesightError):
    exit_code = 1

    def __init__(
        self, message: str = "", reasons: dict[Any, list[str]] | None = None
    ) -> None:
        self.reasons = reasons or {}
        if self.reasons and not message:
            message = "; ".join(
                f"{key}: {', '.join(errors)}" for key, errors in self.reasons.items()
            )
        super().__init__(message)


# gateway (2)


class GatewayError(ForesightError):
    exit_code = 2


class TransportError(GatewayError):
    """Network or provider failure, retryable"""


class RateLimited(GatewayError):
    def __init__(self, message: str = "", retry_after: float | None = None) -> None:
        super().__init__(message)
        self.retry_after = retry_after


class MissingLogprobs(GatewayError):
    """Provider returned no token alternatives (misconfiguration)"""


class MissingFixture(GatewayError):
    pass


class ProviderUnavailable(GatewayError):
    pass


RETRYABLE = (TransportError, RateLimited)


# parsing (3)


class ParseError(ForesightError):
    exit_code = 3


class MalformedGeneration(ParseError):
    def __init__(self, message: str = "", position: int | None = None) -> None:
        self.position = position
        if position is not None:
            message = f"{message} (line {position})"
        super().__init__(message)


class MalformedResponse(ParseError):
    pass


class AnchorNotFound(ParseError):
    pass


class NoParseableGuesses(ParseError):
    def __init__(self, message: str = "", raw: str | None = None) -> None:
        self.raw = raw
        if raw is not None:
            message = f"{message}\n--- completion ---\n{raw}"
        super().__init__(message)


# storage (4)


class StorageError(ForesightError):
    exit_code = 4


class UnknownForecastId(StorageError, KeyError):
    def __str__(self) -> str:
        return ForesightError.__str__(self)


class CorruptLedger(StorageError):
    pass


class LedgerWriteError(StorageError):
    pass


# insufficient data (5)


class InsufficientData(ForesightError):
    exit_code = 5


class EmptyStore(InsufficientData):
    pass


class EmptyGuessList(InsufficientData, ValueError):
    pass


class EmptySet(InsufficientData, ValueError):
    pass


class TooFewRecords(InsufficientData):
    pass


class NonConvergence(InsufficientData):
    def __init__(self, message: str = "", residual: float | None = None) -> None:
        self.residual = residual
        if residual is not None:
            message = f"{message} (residual: {residual:.3e})"
        super().__init__(message)
