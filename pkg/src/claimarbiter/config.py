"""Config file parsing and resolution of runtime settings.

The config file is INI-style with one section per concern:

    [pipeline]
    entity_count = 2
    query_count = 5
    article_count = 10
    tau = 0.7
    max_rounds = 5
    evidence_cap_per_side = 3

    [llm]
    endpoint = https://api.openai.com/v1
    model = gpt-4o
    credential_env = OPENAI_API_KEY
    temperature = 0.0

    [search]
    endpoint = https://api.search.brave.com/res/v1/web/search
    credential_env = BRAVE_API_KEY
    results_per_query = 10

Precedence is CLI flag over config file over built-in default. Credentials
are only ever named by environment variable, never stored.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

from claimarbiter.core import PipelineConfig, exact_fraction
from claimarbiter.gateway import LiveBackend, LlmGateway, ReplayBackend
from claimarbiter.retrieval import FixtureSearchProvider, LiveSearchProvider

DEFAULTS: dict[str, dict[str, str]] = {
    "pipeline": {
        "entity_count": "2",
        "query_count": "5",
        "article_count": "10",
        "tau": "0.7",
        "max_rounds": "5",
        "evidence_cap_per_side": "3",
    },
    "llm": {
        "endpoint": "https://api.openai.com/v1",
        "model": "gpt-4o",
        "credential_env": "OPENAI_API_KEY",
        "temperature": "0.0",
    },
    "search": {
        "endpoint": "https://api.search.brave.com/res/v1/web/search",
        "credential_env": "BRAVE_API_KEY",
        "results_per_query": "10",
    },
}


@dataclass(frozen=True)
class RunSettings:
    """Everything needed to build the pipeline for one invocation."""

    pipeline: PipelineConfig
    llm_endpoint: str
    llm_model: str
    llm_credential_env: str
    llm_temperature: float
    search_endpoint: str
    search_credential_env: str
    results_per_query: int


def load_settings(config_path: str | Path | None = None,
                  tau: str | float | None = None,
                  max_rounds: int | None = None) -> RunSettings:
    """Merge defaults, an optional config file, and CLI overrides."""
    parser = configparser.ConfigParser()
    parser.read_dict(DEFAULTS)
    if config_path is not None:
        config_path = Path(config_path)
        if not config_path.exists():
            raise FileNotFoundError(f"config file not found: {config_path}")
        parser.read(config_path, encoding="utf-8")

    pipeline = PipelineConfig(
        entity_count=parser.getint("pipeline", "entity_count"),
        query_count=parser.getint("pipeline", "query_count"),
        article_count=parser.getint("pipeline", "article_count"),
        tau=exact_fraction(str(tau) if tau is not None else parser.get("pipeline", "tau")),
        max_rounds=max_rounds if max_rounds is not None else parser.getint("pipeline", "max_rounds"),
        evidence_cap_per_side=parser.getint("pipeline", "evidence_cap_per_side"),
    )
    return RunSettings(
        pipeline=pipeline,
        llm_endpoint=parser.get("llm", "endpoint"),
        llm_model=parser.get("llm", "model"),
        llm_credential_env=parser.get("llm", "credential_env"),
        llm_temperature=parser.getfloat("llm", "temperature"),
        search_endpoint=parser.get("search", "endpoint"),
        search_credential_env=parser.get("search", "credential_env"),
        results_per_query=parser.getint("search", "results_per_query"),
    )


def build_gateway(settings: RunSettings, replay: str | Path | None = None,
                  record: str | Path | None = None) -> LlmGateway:
    """Replay backend when a cassette is given, otherwise live (+ recording)."""
    if replay is not None:
        backend = ReplayBackend(replay)
    else:
        backend = LiveBackend(
            endpoint=settings.llm_endpoint,
            credential_env=settings.llm_credential_env,
        )
    return LlmGateway(
        backend,
        model_id=settings.llm_model,
        temperature=settings.llm_temperature,
        record_path=record,
    )


def build_provider(settings: RunSettings, fixtures: str | Path | None = None):
    """Fixture provider when a corpus directory is given, otherwise live."""
    if fixtures is not None:
        return FixtureSearchProvider(fixtures, results_per_query=settings.results_per_query)
    return LiveSearchProvider(
        endpoint=settings.search_endpoint,
        credential_env=settings.search_credential_env,
        results_per_query=settings.results_per_query,
    )
