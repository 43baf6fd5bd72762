"""Append-only JSONL ledger of forecasts, estimates, outcomes and
calibrated values.

Each line is the canonical json of an entry followed by a chain hash over
the raw entry text and the previous line's chain hash:

    {"appended_at":..,"entry_hash":..,"entry_kind":..,"payload":{..},
     "position":0,"chain_hash":".."}

Opening a ledger re-verifies every chain and payload hash.
"""

import fcntl
import hashlib
import os
import threading
from datetime import date, datetime
from pathlib import Path
from typing import Any, Callable, Literal, TypeAlias

import orjson
from anystore.logging import get_logger
from pydantic import BaseModel, ConfigDict, ValidationError

from foresight.exceptions import (
    CorruptLedger,
    LedgerWriteError,
    PreconditionError,
    UnknownForecastId,
)
from foresight.model import (
    CalibratedValue,
    CalibrationRow,
    EstimateResult,
    ForecastSpec,
    Lifecycle,
    OutcomeRecord,
    Record,
    Verdict,
)
from foresight.util import canonical_json, make_hash, utcnow

log = get_logger(__name__)

EntryKind: TypeAlias = Literal["forecast", "estimate", "outcome", "calibrated"]
KINDS: dict[str, type[Record]] = {
    "forecast": ForecastSpec,
    "estimate": EstimateResult,
    "outcome": OutcomeRecord,
    "calibrated": CalibratedValue,
}
CHAIN_SEP = b',"chain_hash":"'
GENESIS = "0" * 64


class LedgerEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    position: int = -1
    entry_kind: EntryKind
    appended_at: datetime | None = None
    entry_hash: str
    payload: dict[str, Any]

    @classmethod
    def create(cls, record: Record) -> "LedgerEntry":
        for kind, clazz in KINDS.items():
            if isinstance(record, clazz):
                payload = record.model_dump(mode="json")
                return cls(
                    entry_kind=kind,  # type: ignore[arg-type]
                    entry_hash=make_hash(payload),
                    payload=payload,
                )
        raise PreconditionError(f"Not a ledger record: `{type(record).__name__}`")

    @property
    def record(self) -> Record:
        return KINDS[self.entry_kind].model_validate(self.payload)

    @property
    def forecast_id(self) -> str:
        if self.entry_kind == "forecast":
            return self.payload["id"]
        return self.payload["forecast_id"]


def _chain(previous: str, body: bytes) -> str:
    return hashlib.sha256(previous.encode() + body).hexdigest()


def serialize_entry(entry: LedgerEntry, previous: str) -> tuple[bytes, str]:
    body = canonical_json(entry.model_dump(mode="json"))
    chain = _chain(previous, body)
    return body[:-1] + CHAIN_SEP + chain.encode() + b'"}\n', chain


def parse_line(line: bytes, previous: str, lineno: int) -> tuple[LedgerEntry, str]:
    ix = line.rfind(CHAIN_SEP)
    if ix < 0 or not line.endswith(b'"}'):
        raise CorruptLedger(f"Malformed ledger line {lineno}")
    body = line[:ix] + b"}"
    chain = line[ix + len(CHAIN_SEP) : -2].decode("utf-8", "replace")
    if _chain(previous, body) != chain:
        raise CorruptLedger(f"Hash chain broken at line {lineno}")
    try:
        entry = LedgerEntry.model_validate(orjson.loads(body))
    except (orjson.JSONDecodeError, ValidationError) as e:
        raise CorruptLedger(f"Invalid entry at line {lineno}: {e}") from e
    if entry.entry_hash != make_hash(entry.payload):
        raise CorruptLedger(f"Payload hash mismatch at line {lineno}")
    if entry.position != lineno - 1:
        raise CorruptLedger(f"Unexpected position at line {lineno}")
    return entry, chain


class Ledger:
    """Single writer (exclusive file lock), many readers"""

    def __init__(
        self, path: Path | str, clock: Callable[[], datetime] = utcnow
    ) -> None:
        self.path = Path(path)
        self.clock = clock
        self._lock = threading.RLock()
        self._load()

    def _load(self) -> None:
        self.entries: list[LedgerEntry] = []
        self._records: list[Record] = []
        self._forecasts: dict[str, ForecastSpec] = {}
        self._by_forecast: dict[str, list[int]] = {}
        self._chain = GENESIS
        self._size = 0
        if not self.path.exists():
            return
        if not self.path.is_file():
            raise LedgerWriteError(f"Ledger path is not a file: `{self.path}`")
        try:
            data = self.path.read_bytes()
        except OSError as e:
            raise LedgerWriteError(f"Cannot read ledger: {e}") from e
        if data and not data.endswith(b"\n"):
            raise CorruptLedger("Ledger does not end with a newline")
        for lineno, line in enumerate(data.splitlines(), 1):
            entry, self._chain = parse_line(line, self._chain, lineno)
            self._index(entry)
        self._size = len(data)
        log.debug("Opened ledger", path=str(self.path), entries=len(self.entries))

    def _index(self, entry: LedgerEntry) -> None:
        try:
            record = entry.record
        except ValidationError as e:
            raise CorruptLedger(f"Invalid payload at position {entry.position}: {e}")
        if isinstance(record, ForecastSpec):
            self._forecasts[record.id] = record
        elif entry.forecast_id not in self._forecasts:
            raise CorruptLedger(
                f"Entry {entry.position} references unknown `{entry.forecast_id}`"
            )
        self.entries.append(entry)
        self._records.append(record)
        self._by_forecast.setdefault(entry.forecast_id, []).append(entry.position)

    def __len__(self) -> int:
        return len(self.entries)

    def append(self, entry: LedgerEntry | Record) -> int:
        """Append an entry (or a record, wrapped into an entry)

        Returns:
            The position of the new entry
        """
        if not isinstance(entry, LedgerEntry):
            entry = LedgerEntry.create(entry)
        if entry.entry_hash != make_hash(entry.payload):
            raise PreconditionError("Entry hash does not match payload")
        with self._lock:
            try:
                with open(self.path, "ab") as fh:
                    fcntl.flock(fh, fcntl.LOCK_EX)
                    try:
                        if os.fstat(fh.fileno()).st_size != self._size:
                            self._load()
                        self._check_reference(entry)
                        entry = entry.model_copy(
                            update={
                                "position": len(self.entries),
                                "appended_at": self.clock(),
                            }
                        )
                        line, chain = serialize_entry(entry, self._chain)
                        fh.write(line)
                        fh.flush()
                        os.fsync(fh.fileno())
                    finally:
                        fcntl.flock(fh, fcntl.LOCK_UN)
            except OSError as e:
                raise LedgerWriteError(f"Cannot write ledger `{self.path}`: {e}") from e
            self._chain = chain
            self._size += len(line)
            self._index(entry)
        log.debug("Appended", kind=entry.entry_kind, position=entry.position)
        return entry.position

    def _check_reference(self, entry: LedgerEntry) -> None:
        if entry.entry_kind == "forecast":
            if entry.forecast_id in self._forecasts:
                raise PreconditionError(f"Forecast `{entry.forecast_id}` exists")
        elif entry.forecast_id not in self._forecasts:
            raise UnknownForecastId(f"Unknown forecast id `{entry.forecast_id}`")

    # queries

    def has_forecast(self, forecast_id: str) -> bool:
        return forecast_id in self._forecasts

    def get_forecast(self, forecast_id: str) -> ForecastSpec:
        try:
            return self._forecasts[forecast_id]
        except KeyError:
            raise UnknownForecastId(f"Unknown forecast id `{forecast_id}`")

    def forecasts(self) -> list[ForecastSpec]:
        return list(self._forecasts.values())

    def records(self, forecast_id: str) -> list[tuple[int, Record]]:
        self.get_forecast(forecast_id)
        return [(p, self._records[p]) for p in self._by_forecast[forecast_id]]

    def estimates(self, forecast_id: str) -> list[tuple[int, EstimateResult]]:
        return [
            (p, r)
            for p, r in self.records(forecast_id)
            if isinstance(r, EstimateResult)
        ]

    def latest_estimate(self, forecast_id: str) -> EstimateResult | None:
        estimates = self.estimates(forecast_id)
        return estimates[-1][1] if estimates else None

    def outcomes(
        self, forecast_id: str, purpose: str = "outcome"
    ) -> list[OutcomeRecord]:
        return [
            r
            for _, r in self.records(forecast_id)
            if isinstance(r, OutcomeRecord) and r.purpose == purpose
        ]

    def calibrated(
        self, forecast_id: str, method: str, current: bool = True
    ) -> list[CalibratedValue]:
        """Calibrated values of a method; with `current` only those appended
        after the latest estimate"""
        records = self.records(forecast_id)
        since = -1
        if current:
            estimates = self.estimates(forecast_id)
            since = estimates[-1][0] if estimates else -1
        return [
            r
            for p, r in records
            if p > since and isinstance(r, CalibratedValue) and r.method == method
        ]

    def reconciled_p(self, forecast_id: str) -> float | None:
        values = self.calibrated(forecast_id, "reconcile")
        return values[-1].p if values else None

    def is_screened_invalid(self, forecast_id: str) -> bool:
        screenings = self.outcomes(forecast_id, "screening")
        return bool(screenings) and screenings[-1].verdict is Verdict.HAPPENED

    def pending(self) -> list[ForecastSpec]:
        return [f for f in self.forecasts() if self.latest_estimate(f.id) is None]

    def lifecycle(self, forecast_id: str) -> Lifecycle:
        self.get_forecast(forecast_id)
        has_outcome = bool(self.outcomes(forecast_id))
        if has_outcome and self.calibrated(forecast_id, "svr", current=False):
            return Lifecycle.SCORED
        if has_outcome:
            return Lifecycle.FACTCHECKED
        if self.calibrated(forecast_id, "reconcile", current=False):
            return Lifecycle.RECONCILED
        if self.estimates(forecast_id):
            return Lifecycle.ESTIMATED
        return Lifecycle.GENERATED

    def final_outcome(
        self, forecast_id: str, as_of: date | None = None
    ) -> OutcomeRecord | None:
        """Latest conclusive outcome checked on or before `as_of`"""
        for outcome in reversed(self.outcomes(forecast_id)):
            if as_of is not None and outcome.checked_at > as_of:
                continue
            if outcome.verdict.conclusive:
                return outcome
        return None

    def calibration_join(
        self, as_of: date | None = None
    ) -> tuple[list[CalibrationRow], dict[str, int]]:
        """Joined (estimate, conclusive outcome) rows plus the counts of
        excluded forecasts per reason"""
        rows: list[CalibrationRow] = []
        excluded = {"invalid": 0, "not_estimated": 0, "inconclusive": 0}
        for spec in self.forecasts():
            if self.is_screened_invalid(spec.id):
                excluded["invalid"] += 1
                continue
            estimate = self.latest_estimate(spec.id)
            if estimate is None:
                excluded["not_estimated"] += 1
                continue
            outcome = self.final_outcome(spec.id, as_of)
            if outcome is None or outcome.binary_outcome is None:
                excluded["inconclusive"] += 1
                continue
            p_hat = self.reconciled_p(spec.id)
            rows.append(
                CalibrationRow(
                    forecast_id=spec.id,
                    p_hat=estimate.p_hat if p_hat is None else p_hat,
                    u_hat=estimate.u_hat,
                    outcome=outcome.binary_outcome,
                    topic=spec.topic,
                    top_value=estimate.top_value,
                )
            )
        return rows, excluded

    def dataset_for_calibration(
        self, as_of: date | None = None
    ) -> list[CalibrationRow]:
        """Estimated, screened valid forecasts with a conclusive outcome"""
        rows, _ = self.calibration_join(as_of)
        return rows
