"""Service configuration: one YAML tree, documented in docs/config.md.

Every capability (text, vision, image, search) picks either the
deterministic mock or an HTTP backend. The ``--mock`` CLI flag forces all
four to mock regardless of the file, which is also the default when no
config file is given.
"""

from __future__ import annotations

from pathlib import Path
from typing import Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .orchestrator import FanOutPolicy
from .providers import (
    HttpImageProvider,
    HttpSearchProvider,
    HttpTextProvider,
    HttpVisionProvider,
    MockImageProvider,
    MockSearchProvider,
    MockTextProvider,
    MockVisionProvider,
    ProviderConfig,
    ProviderSet,
    default_token_env,
)

_HTTP_CLASSES = {
    "text": HttpTextProvider,
    "vision": HttpVisionProvider,
    "image": HttpImageProvider,
    "search": HttpSearchProvider,
}
_MOCK_CLASSES = {
    "text": MockTextProvider,
    "vision": MockVisionProvider,
    "image": MockImageProvider,
    "search": MockSearchProvider,
}


class ConfigError(ValueError):
    pass


class ProviderChoice(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["mock", "http"] = "mock"
    seed: int = 0  # mock only
    http: ProviderConfig | None = None

    def build(self, capability: str):
        if self.kind == "mock":
            return _MOCK_CLASSES[capability](seed=self.seed)
        http = self.http or ProviderConfig()
        if not http.auth_token_env:
            http = http.model_copy(update={"auth_token_env": default_token_env(capability)})
        if not http.base_url:
            raise ConfigError(f"providers.{capability}.http.base_url is required for kind=http")
        return _HTTP_CLASSES[capability](http)


class ProvidersConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    text: ProviderChoice = ProviderChoice()
    vision: ProviderChoice = ProviderChoice()
    image: ProviderChoice = ProviderChoice()
    search: ProviderChoice = ProviderChoice()


class ServiceConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    listen: str = "127.0.0.1:8300"
    bearer_token: str | None = None
    store_root: Path = Path("ideastudio-data")
    static_dir: Path | None = None
    prompt_template_dir: Path | None = None
    fan_out: FanOutPolicy = FanOutPolicy()
    providers: ProvidersConfig = ProvidersConfig()

    @property
    def host(self) -> str:
        return self.listen.rsplit(":", 1)[0] or "127.0.0.1"

    @property
    def port(self) -> int:
        return int(self.listen.rsplit(":", 1)[1])


def load_config(path: str | Path) -> ServiceConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text()) or {}
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    except yaml.YAMLError as err:
        raise ConfigError(f"config {path} is not valid YAML: {err}") from err
    try:
        return ServiceConfig.model_validate(raw)
    except ValidationError as err:
        raise ConfigError(f"config {path} is invalid: {err}") from err


def force_mock(config: ServiceConfig) -> ServiceConfig:
    mock = ProvidersConfig(
        text=ProviderChoice(kind="mock", seed=config.providers.text.seed),
        vision=ProviderChoice(kind="mock", seed=config.providers.vision.seed),
        image=ProviderChoice(kind="mock", seed=config.providers.image.seed),
        search=ProviderChoice(kind="mock", seed=config.providers.search.seed),
    )
    return config.model_copy(update={"providers": mock})


def build_providers(config: ServiceConfig) -> ProviderSet:
    built = {
        capability: getattr(config.providers, capability).build(capability)
        for capability in ("text", "vision", "image", "search")
    }
    providers = ProviderSet(
        text=built["text"],
        vision=built["vision"],
        image=built["image"],
        search=built["search"],
    )
    for provider in built.values():
        closer = getattr(provider, "aclose", None)
        if closer is not None:
            providers.closers.append(closer)
    return providers


SAMPLE_CONFIG = """\
# ideastudio service configuration
listen: 127.0.0.1:8300
# bearer_token: change-me            # omit for unauthenticated local use
store_root: ./ideastudio-data
# static_dir: ./frontend/dist       # serve the web UI from here
# prompt_template_dir: ./my-prompts # override packaged prompt templates

fan_out:
  brainstorm_count: 8
  refine_count: 5
  score_schedule: even
  parse_retries: 2

providers:
  # Each capability is either the deterministic mock or an HTTP backend.
  text:
    kind: mock
    seed: 0
    # kind: http
    # http:
    #   base_url: https://api.example.com/v1
    #   model_name: your-chat-model
    #   auth_token_env: AIDEATION_TEXT_TOKEN
    #   timeout: 120
    #   max_retries: 2
  vision:
    kind: mock
  image:
    kind: mock
  search:
    kind: mock
"""
