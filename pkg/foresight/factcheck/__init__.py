from foresight.factcheck.checker import FactChecker, VerdictAnswer, parse_verdict

__all__ = ["FactChecker", "VerdictAnswer", "parse_verdict"]
