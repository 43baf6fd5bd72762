from datetime import date
from itertools import product

import pytest

from foresight.exceptions import MalformedResponse, PreconditionError
from foresight.factcheck.checker import REMINDER, FactChecker, parse_verdict
from foresight.llm import MockGateway
from foresight.model import SourceHeadline, Verdict, validate
from foresight.news import News
from foresight.news.store import HeadlineStore, TrendStore
from tests.conftest import make_spec, write_rules

START, END = date(2024, 3, 1), date(2024, 6, 30)
OPEN, CLOSED = date(2024, 5, 1), date(2024, 7, 15)


def _news(n=3):
    headlines = [
        SourceHeadline(headline=f"Case report {i}", published=date(2024, 3, 10))
        for i in range(n)
    ]
    return News(TrendStore(), HeadlineStore(headlines))


def _spec(title="Case 01"):
    return make_spec(
        title=title,
        timeframe_start=START,
        timeframe_end=END,
        created_at=date(2024, 2, 15),
    )


def test_factcheck_parse_verdict():
    answer = parse_verdict("VERDICT: Happened\nEVIDENCE: [1, 3]", 3)
    assert answer.verdict is Verdict.HAPPENED
    assert answer.evidence == [1, 3]
    assert answer.uncited is False
    assert answer.impossible is False

    answer = parse_verdict("verdict: did not happen\nIMPOSSIBLE: yes\nEVIDENCE: 2", 3)
    assert answer.verdict is Verdict.DID_NOT_HAPPEN
    assert answer.impossible is True

    # citations outside the sources do not count
    assert parse_verdict("VERDICT: 1\nEVIDENCE: 2, 9", 3).evidence == [2]
    assert parse_verdict("VERDICT: 1\nEVIDENCE: 9", 3).uncited is True
    assert parse_verdict("VERDICT: 1", 3).uncited is True
    answer = parse_verdict("VERDICT: inconclusive\nEVIDENCE: none.", 0)
    assert answer.evidence == []
    assert answer.uncited is False

    with pytest.raises(MalformedResponse, match="VERDICT"):
        parse_verdict("It happened.", 3)
    with pytest.raises(MalformedResponse, match="maybe"):
        parse_verdict("VERDICT: maybe\nEVIDENCE: 1", 3)


LABELS = {
    "happened": Verdict.HAPPENED,
    "Happened.": Verdict.HAPPENED,
    "1": Verdict.HAPPENED,
    "did not happen": Verdict.DID_NOT_HAPPEN,
    "Did Not Happen.": Verdict.DID_NOT_HAPPEN,
    "-1": Verdict.DID_NOT_HAPPEN,
    "inconclusive": Verdict.INCONCLUSIVE,
    "Inconclusive.": Verdict.INCONCLUSIVE,
    "0": Verdict.INCONCLUSIVE,
}


def test_factcheck_labeled_corpus(tmp_path):
    cases = []
    rules = []
    for ix, (label, as_of, impossible) in enumerate(
        product(LABELS, (OPEN, CLOSED), (False, True)), 1
    ):
        title = f"Case {ix:02d}"
        verdict = LABELS[label]
        evidence = "none" if verdict is Verdict.INCONCLUSIVE else "1"
        rules.append(
            {
                "match": ["TASK: verdict", f"EVENT: {title}\n"],
                "text": f"VERDICT: {label}\n"
                f"IMPOSSIBLE: {'yes' if impossible else 'no'}\n"
                f"EVIDENCE: {evidence}",
            }
        )
        # an open window cannot rule an event out
        if as_of == OPEN and verdict is Verdict.DID_NOT_HAPPEN and not impossible:
            verdict = Verdict.INCONCLUSIVE
        cases.append((_spec(title), as_of, verdict))
    assert len(cases) == 36
    assert {v for _, _, v in cases} == set(Verdict)

    write_rules(tmp_path, rules)
    checker = FactChecker(MockGateway(tmp_path), _news())
    for spec, as_of, expected in cases:
        outcome = checker.check(spec, as_of)
        assert outcome.verdict is expected, spec.title
        assert outcome.binary_outcome == expected.binary_outcome
        assert outcome.checked_at == as_of
        assert outcome.purpose == "outcome"
        assert validate(outcome) == []


def test_factcheck_downgrade(tmp_path):
    write_rules(
        tmp_path,
        [
            {
                "match": ["TASK: verdict"],
                "text": "VERDICT: did not happen\nEVIDENCE: none",
            }
        ],
    )
    checker = FactChecker(MockGateway(tmp_path), _news())
    outcome = checker.check(_spec(), OPEN)
    assert outcome.verdict is Verdict.INCONCLUSIVE
    assert outcome.downgraded is True
    assert outcome.binary_outcome is None

    outcome = checker.check(_spec(), END)
    assert outcome.verdict is Verdict.DID_NOT_HAPPEN
    assert outcome.downgraded is False
    assert outcome.binary_outcome == 0

    with pytest.raises(PreconditionError, match="before its window opens"):
        checker.check(_spec(), date(2024, 2, 29))


def test_factcheck_window(tmp_path):
    write_rules(
        tmp_path,
        [{"match": ["TASK: verdict"], "text": "VERDICT: happened\nEVIDENCE: 1"}],
    )
    gateway = MockGateway(tmp_path)
    headlines = [
        SourceHeadline(headline="Case report early", published=date(2024, 2, 20)),
        SourceHeadline(headline="Case report inside", published=date(2024, 4, 1)),
        SourceHeadline(headline="Case report late", published=date(2024, 6, 1)),
    ]
    checker = FactChecker(gateway, News(TrendStore(), HeadlineStore(headlines)))
    outcome = checker.check(_spec(), OPEN)
    assert outcome.verdict is Verdict.HAPPENED
    assert outcome.evidence == [1]
    prompt = gateway.calls[0]["prompt"]
    assert "between 2024-03-01\nand 2024-05-01" in prompt
    assert "[1] 2024-04-01 Case report inside" in prompt
    assert "Case report early" not in prompt
    assert "Case report late" not in prompt


def test_factcheck_uncited(tmp_path):
    write_rules(
        tmp_path,
        [
            {
                "match": ["TASK: verdict"],
                "text": "VERDICT: happened\nEVIDENCE: trust me",
            },
            {
                "match": ["TASK: verdict", "REMINDER:"],
                "text": "VERDICT: happened\nEVIDENCE: 2",
            },
        ],
    )
    gateway = MockGateway(tmp_path)
    outcome = FactChecker(gateway, _news()).check(_spec(), CLOSED)
    assert outcome.verdict is Verdict.HAPPENED
    assert outcome.evidence == [2]
    assert outcome.uncited is False
    assert len(gateway.calls) == 2
    assert gateway.calls[1]["prompt"].endswith(REMINDER)

    write_rules(
        tmp_path,
        [{"match": ["TASK: verdict"], "text": "VERDICT: happened\nEVIDENCE: 7"}],
    )
    gateway = MockGateway(tmp_path)
    outcome = FactChecker(gateway, _news()).check(_spec(), CLOSED)
    assert outcome.verdict is Verdict.INCONCLUSIVE
    assert outcome.uncited is True
    assert len(gateway.calls) == 2


def test_factcheck_stage(tmp_path):
    write_rules(tmp_path, [{"match": ["TASK: verdict"], "text": "No idea."}])
    checker = FactChecker(MockGateway(tmp_path), _news())
    with pytest.raises(MalformedResponse) as e:
        checker.check(_spec(), CLOSED)
    assert e.value.stage == "verdict"


def test_factcheck_fixtures(gateway, news, settings, specs):
    checker = FactChecker(gateway, news, settings)
    as_of = date(2024, 10, 1)
    verdicts = {key: checker.check(spec, as_of).verdict for key, spec in specs.items()}
    assert verdicts == {
        "tesla": Verdict.DID_NOT_HAPPEN,
        "toyota": Verdict.DID_NOT_HAPPEN,
        "renault": Verdict.HAPPENED,
        "gm": Verdict.HAPPENED,
        # window still open
        "ford": Verdict.INCONCLUSIVE,
        "vw": Verdict.INCONCLUSIVE,
    }


def test_factcheck_screen(gateway, news, settings, specs):
    checker = FactChecker(gateway, news, settings)
    assert checker.screen_validity(specs["vw"]) is False
    assert checker.screen_validity(specs["tesla"]) is True

    outcome = checker.screen(specs["vw"])
    assert outcome.purpose == "screening"
    assert outcome.verdict is Verdict.HAPPENED
    assert outcome.checked_at == specs["vw"].created_at
    prompt = gateway.calls[-1]["prompt"]
    assert "MODE: screening" in prompt
    # sources predate the forecast
    assert "between 2023-08-19\nand 2024-02-14" in prompt
    assert "Volkswagen unveils ID.2 production model at press event" in prompt
