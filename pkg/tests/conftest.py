from datetime import date
from pathlib import Path
from typing import Any

import orjson
import pytest

from foresight.core import get_news
from foresight.forecast.generator import ForecastGenerator
from foresight.llm.mock import MockGateway
from foresight.model import ForecastSpec, Topic
from foresight.settings import Settings

FIXTURES_PATH = (Path(__file__).parent / "fixtures").absolute()
MOCK_PATH = FIXTURES_PATH / "mock"
AS_OF = date(2024, 2, 15)

TITLES = {
    "tesla": "Tesla Cybertruck deliveries exceed 100000 units",
    "toyota": "Toyota wins European Car of the Year 2024",
    "renault": "Renault Scenic wins European Car of the Year 2024",
    "gm": "General Motors announces new battery plant",
    "ford": "Ford recalls more than one million vehicles",
    "vw": "Volkswagen unveils ID.2 production model",
}


def make_spec(**data: Any) -> ForecastSpec:
    defaults = {
        "topic": "automotive",
        "title": "Global EV sales exceed 20M units in 2025",
        "description": "Worldwide sales of electric vehicles pass 20 million.",
        "timeframe_start": date(2024, 3, 1),
        "timeframe_end": date(2025, 12, 31),
        "created_at": AS_OF,
    }
    defaults.update(data)
    return ForecastSpec.create(**defaults)


def write_rules(directory: Path, rules: list[dict[str, Any]], name: str = "rules"):
    """Write an ad hoc mock fixture directory"""
    llm = directory / "llm"
    llm.mkdir(parents=True, exist_ok=True)
    (llm / f"{name}.json").write_bytes(orjson.dumps(rules))
    return directory


@pytest.fixture(scope="module")
def fixtures_path():
    return FIXTURES_PATH


@pytest.fixture(scope="function")
def settings(tmp_path) -> Settings:
    return Settings(
        mock_fixtures_dir=MOCK_PATH,
        ledger_path=tmp_path / "ledger.jsonl",
        model_path=tmp_path / "svr.json",
        trends_path=tmp_path / "trends.jsonl",
    )


@pytest.fixture(scope="function")
def gateway(settings):
    return MockGateway(MOCK_PATH, settings)


@pytest.fixture(scope="function")
def news(settings):
    return get_news(settings)


@pytest.fixture(scope="function")
def specs(gateway, news, settings) -> dict[str, ForecastSpec]:
    generator = ForecastGenerator(gateway, news, settings)
    generated = generator.generate_forecasts(Topic.from_slug("automotive"), 6, AS_OF)
    by_title = {s.title: s for s in generated}
    return {key: by_title[title] for key, title in TITLES.items()}
