"""Config loading, provider wiring, and the checked-in config schema."""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema
import pytest
import yaml

from ideastudio.config import (
    SAMPLE_CONFIG,
    ConfigError,
    ProviderChoice,
    ServiceConfig,
    build_providers,
    force_mock,
    load_config,
)
from ideastudio.providers import (
    HttpTextProvider,
    MockImageProvider,
    MockSearchProvider,
    MockTextProvider,
    MockVisionProvider,
    ProviderConfig,
)

SCHEMA_PATH = Path(__file__).parent.parent / "docs" / "config.schema.json"


class TestLoading:
    def test_sample_config_loads(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text(SAMPLE_CONFIG)
        config = load_config(path)
        assert config.fan_out.brainstorm_count == 8
        assert config.providers.text.kind == "mock"

    def test_defaults_are_all_mock(self):
        providers = build_providers(ServiceConfig())
        assert isinstance(providers.text, MockTextProvider)
        assert isinstance(providers.vision, MockVisionProvider)
        assert isinstance(providers.image, MockImageProvider)
        assert isinstance(providers.search, MockSearchProvider)

    def test_http_requires_base_url(self):
        choice = ProviderChoice(kind="http", http=ProviderConfig())
        with pytest.raises(ConfigError):
            choice.build("text")

    def test_http_gets_default_token_env(self):
        choice = ProviderChoice(kind="http", http=ProviderConfig(base_url="https://api.test"))
        provider = choice.build("text")
        assert isinstance(provider, HttpTextProvider)
        assert provider.config.auth_token_env == "AIDEATION_TEXT_TOKEN"

    def test_force_mock_overrides_http(self):
        config = ServiceConfig.model_validate(
            {"providers": {"text": {"kind": "http", "http": {"base_url": "https://x"}}}}
        )
        forced = force_mock(config)
        assert forced.providers.text.kind == "mock"

    def test_invalid_yaml_rejected(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("listen: [unclosed")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_unknown_listen_shape_surfaces(self):
        config = ServiceConfig(listen="127.0.0.1:9000")
        assert config.host == "127.0.0.1"
        assert config.port == 9000


class TestConfigSchema:
    def test_checked_in_schema_matches_the_model(self):
        checked_in = json.loads(SCHEMA_PATH.read_text())
        generated = ServiceConfig.model_json_schema()
        for key in ("$schema", "title"):
            checked_in.pop(key, None)
            generated.pop(key, None)
        assert checked_in == generated

    def test_sample_config_validates_against_schema(self):
        schema = json.loads(SCHEMA_PATH.read_text())
        raw = yaml.safe_load(SAMPLE_CONFIG)
        jsonschema.validate(raw, schema)
