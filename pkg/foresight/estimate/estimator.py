"""Probability guesses from the answer position of a completion, and their
logprob weighted mean and standard deviation.

Each alternative token at the answer position is a guess `P_i` with weight
`exp(w_i)` (its token probability):

    p_hat = sum(exp(w_i) * P_i) / sum(exp(w_i))
    u_hat = sqrt(sum(exp(w_i) * (P_i - p_hat) ** 2) / sum(exp(w_i)))

The top alternatives do not sum to one; the ratio is self normalizing, so
no renormalization happens. Only a single answer position is used: for a
numeral spanning several tokens each alternative of the first token is
parsed on its own (`"1"` of `"100"` reads as 1%).
"""

import math
import re
from typing import Iterable, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict

from foresight.exceptions import (
    AnchorNotFound,
    EmptyGuessList,
    NoParseableGuesses,
    PreconditionError,
)
from foresight.llm.model import Completion
from foresight.model import ProbabilityGuess

PERCENTAGE = re.compile(r"^(\d{1,3}(?:\.\d+)?)\s*%?$")
UNIT_INTERVAL = re.compile(r"^(\d*\.\d+|\d+)$")
NUMERIC = re.compile(r"^\s*(\d+(?:\.\d+)?|\.\d+)\s*%?\s*$")


class AnchorPolicy(BaseModel):
    model_config = ConfigDict(frozen=True)

    answer_pattern: str = "Probability:"
    """Marker after which the first numeric token carries the answer"""
    parse_mode: Literal["percentage", "unit_interval"] = "percentage"


def parse_value(token: str, mode: str = "percentage") -> float | None:
    """Parse a single token into a probability, `None` if not possible"""
    token = token.strip()
    if mode == "percentage":
        m = PERCENTAGE.match(token)
        if m is None:
            return None
        value = float(m.group(1))
        if 0 <= value <= 100:
            return value / 100
        return None
    m = UNIT_INTERVAL.match(token)
    if m is None:
        return None
    value = float(m.group(1))
    if 0 <= value <= 1:
        return value
    return None


def find_anchor(completion: Completion, policy: AnchorPolicy) -> int:
    """Index of the answer position: the first position starting after the
    marker whose chosen token is a number, in range or not"""
    if not completion.positions:
        raise PreconditionError("Completion has no token positions")
    marker = completion.full_text.find(policy.answer_pattern)
    if marker < 0:
        raise AnchorNotFound(f"Marker `{policy.answer_pattern}` not in completion")
    marker_end = marker + len(policy.answer_pattern)
    offset = 0
    for ix, position in enumerate(completion.positions):
        if offset >= marker_end:
            if NUMERIC.match(position.chosen_token):
                return ix
        offset += len(position.chosen_token)
    raise AnchorNotFound(
        f"No numeric token after marker `{policy.answer_pattern}` in completion"
    )


def extract_guesses(
    completion: Completion, policy: AnchorPolicy | None = None
) -> list[ProbabilityGuess]:
    """One guess per parseable alternative at the answer position.
    Non numeric or out of range alternatives are dropped."""
    policy = policy or AnchorPolicy()
    position = completion.positions[find_anchor(completion, policy)]
    guesses = []
    for token, logprob in position.alternatives:
        value = parse_value(token, policy.parse_mode)
        if value is not None:
            guesses.append(ProbabilityGuess(value=value, logprob=logprob))
    if not guesses:
        raise NoParseableGuesses(
            "No alternative at the answer position is a probability",
            raw=completion.full_text,
        )
    return guesses


def top_value(
    completion: Completion, policy: AnchorPolicy | None = None
) -> float | None:
    """The chosen token's value at the answer position, the answer a reader of
    the top completion alone would take. `None` if it is out of range."""
    policy = policy or AnchorPolicy()
    position = completion.positions[find_anchor(completion, policy)]
    return parse_value(position.chosen_token, policy.parse_mode)


def logsumexp(values: np.ndarray) -> float:
    top = values.max()
    return float(top + np.log(np.exp(values - top).sum()))


def aggregate(guesses: Iterable[ProbabilityGuess]) -> tuple[float, float]:
    """Logprob weighted mean and standard deviation of the guesses. The
    variance is summed in log space, so guesses far below the top weight
    still count and `u_hat` is 0 only if all values are equal.

    Returns:
        (p_hat, u_hat)
    """
    guesses = list(guesses)
    if not guesses:
        raise EmptyGuessList("Cannot aggregate an empty list of guesses")
    values = np.array([g.value for g in guesses], dtype=np.float64)
    logprobs = np.array([g.logprob for g in guesses], dtype=np.float64)
    if not np.all(np.isfinite(logprobs)):
        raise PreconditionError("Guess logprobs must be finite")
    low, high = values.min(), values.max()
    if low == high:
        return float(low), 0.0
    log_total = logsumexp(logprobs)
    p_hat = float(np.dot(np.exp(logprobs - log_total), values))
    p_hat = min(max(p_hat, float(low)), float(high))
    spread = np.abs(values - p_hat)
    apart = spread > 0
    log_variance = (
        logsumexp(logprobs[apart] + 2 * np.log(spread[apart])) - log_total
    )
    # below the smallest subnormal the square root would round to zero
    u_hat = max(float(np.exp(log_variance / 2)), math.ulp(0.0))
    return p_hat, u_hat
