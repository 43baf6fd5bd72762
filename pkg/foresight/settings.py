from pathlib import Path

from anystore.settings import BaseSettings
from pydantic import AliasChoices, Field, SecretStr
from pydantic_settings import PydanticBaseSettingsSource, SettingsConfigDict

__version__ = "0.1.0"

TOPICS = [
    "Automotive",
    "Climate Change",
    "Economy",
    "Energy",
    "Entertainment",
    "Finance",
    "Geopolitics",
    "Health",
    "Politics",
    "Retail",
    "Science",
    "Space",
    "Sports",
    "Technology",
    "Transportation",
]


class Settings(BaseSettings):
    """Engine configuration.

    Values are read (highest precedence first) from init arguments, the
    key-value config file (`--config` or `FORESIGHT_CONFIG`), the
    environment and finally the defaults below. Secrets are expected in the
    environment only.
    """

    model_config = SettingsConfigDict(
        env_file=".env", env_prefix="foresight_", extra="ignore"
    )

    testing: bool = Field(
        default=False, validation_alias=AliasChoices("testing", "debug")
    )

    # storage
    ledger_path: Path = Path("foresight.ledger.jsonl")
    trends_path: Path = Path("foresight.trends.jsonl")
    model_path: Path = Path("foresight.svr.json")
    trace_path: Path | None = None
    """Stage traces go next to the ledger (`<ledger>.trace.jsonl`) if unset"""

    # mock mode: directory with llm/ fixtures, trends.jsonl, headlines.jsonl
    mock_fixtures_dir: Path | None = None

    # language model provider
    llm_base_url: str | None = None
    llm_model: str = "gpt-4o"
    llm_key: SecretStr | None = None
    llm_timeout: float = 60.0
    llm_max_tokens: int = 512
    llm_max_retries: int = 3
    llm_retry_delay: float = 1.0
    """Base delay in seconds, doubled for every retry"""

    # provider minimums / maximums used by `deterministic_params()`
    llm_min_temperature: float = 0.0
    llm_min_top_p: float = 0.01
    llm_max_alternatives: int = 20

    # news provider
    news_url: str | None = None
    news_key: SecretStr | None = None
    news_timeout: float = 30.0
    news_retry_delay: float = 1.0

    topics: list[str] = TOPICS
    prompt_version: str = "v1"

    # generation & estimation retrieval
    generation_trends: int = 10
    estimate_trends: int = 10
    sources_limit: int = 20
    sources_window_days: int = 90
    source_min_score: float = 0.0
    key_events_max: int = 10

    # fact checking
    screen_lookback_days: int = 180

    # answer anchoring
    anchor_marker: str = "Probability:"
    anchor_mode: str = "percentage"

    # epsilon-SVR calibration
    svr_c: float = 1.0
    svr_epsilon: float = 0.05
    svr_gamma: float | None = None
    """RBF bandwidth; derived from the standardized feature variance if unset"""
    svr_tol: float = 1e-6
    svr_max_passes: int = 10_000
    svr_target_neighbours: int | None = None
    """Neighbours for smoothing binary targets: unset = ceil(sqrt(n)), 0 = off"""

    report_bins: int = 10

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        # config file wins over the environment
        return init_settings, dotenv_settings, env_settings, file_secret_settings


def load_settings(config: Path | str | None = None, **overrides) -> Settings:
    """Build settings from an optional config file plus explicit overrides
    (command line flags). `None` overrides are ignored."""
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if config is not None:
        return Settings(_env_file=str(config), **overrides)  # type: ignore[call-arg]
    return Settings(**overrides)
