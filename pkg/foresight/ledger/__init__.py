from foresight.ledger.store import Ledger, LedgerEntry

__all__ = ["Ledger", "LedgerEntry"]
