"""Provider abstractions for the four external capabilities.

Text generation, vision captioning, image generation, and image search
each get their own interface so backends can differ per capability. Every
interface has one HTTP client implementation and one deterministic mock;
the rest of the service only ever sees these neutral types.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from collections.abc import Awaitable, Callable, Iterable
from dataclasses import dataclass, field
from typing import Any, TypeVar

import anyio
from pydantic import BaseModel, ConfigDict, Field

from ..prompts import PromptBundle

REDACTED = "[redacted]"

DEFAULT_CONCURRENCY = 8


class ProviderConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    base_url: str = ""
    auth_token_env: str = ""
    timeout: float = Field(default=120.0, gt=0)
    max_retries: int = Field(default=2, ge=0)
    model_name: str = ""
    max_concurrency: int = Field(default=DEFAULT_CONCURRENCY, ge=1)
    # Pass-through sampling/backend options (top_p, quality, ...); no
    # defaults are imposed beyond the per-role temperature hint.
    options: dict[str, Any] = {}


class SearchResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    image_url: str
    thumbnail_url: str
    source_page_url: str
    title: str
    width: int = 0  # 0 = unknown
    height: int = 0


@dataclass(frozen=True)
class GeneratedImage:
    data: bytes
    width: int
    height: int
    media_type: str = "image/png"


class ProviderError(Exception):
    retryable = False


class ProviderTimeout(ProviderError):
    retryable = True


class AuthFailure(ProviderError):
    retryable = False


class RateLimited(ProviderError):
    retryable = True

    def __init__(self, message: str = "rate limited", retry_after: float = 0.0):
        self.retry_after = retry_after
        super().__init__(message)


class UpstreamError(ProviderError):
    retryable = True

    def __init__(self, status: int, body: str = ""):
        self.status = status
        self.body = body
        super().__init__(f"upstream error {status}: {body[:200]}")


class QuotaExceeded(ProviderError):
    retryable = False


class UnsupportedFormat(ProviderError):
    retryable = False


class ContentPolicyRejection(ProviderError):
    """Non-retryable; surfaces to the UI as a per-card failure."""

    retryable = False


def scrub_secrets(text: str, secrets: Iterable[str]) -> str:
    """Remove credential material from text bound for logs or errors."""
    for secret in secrets:
        if secret:
            text = text.replace(secret, REDACTED)
    return text


T = TypeVar("T")


async def call_with_retries(
    fn: Callable[[], Awaitable[T]],
    *,
    max_retries: int,
    base_delay: float = 0.5,
    sleep: Callable[[float], Awaitable[None]] = anyio.sleep,
) -> T:
    """Retry retryable provider errors with exponential backoff.

    A RateLimited error's retry_after takes precedence over the backoff
    schedule; non-retryable errors propagate immediately.
    """
    attempt = 0
    while True:
        try:
            return await fn()
        except ProviderError as err:
            if not err.retryable or attempt >= max_retries:
                raise
            delay = base_delay * (2**attempt)
            if isinstance(err, RateLimited) and err.retry_after > 0:
                delay = max(delay, err.retry_after)
            await sleep(delay)
            attempt += 1


class TextProvider(ABC):
    @abstractmethod
    async def generate_text(self, bundle: PromptBundle) -> str:
        """Return the model's raw completion text, untrimmed."""


class VisionProvider(ABC):
    @abstractmethod
    async def caption_image(self, image: bytes | str) -> str:
        """Caption image bytes or an image URL."""


class ImageProvider(ABC):
    @abstractmethod
    async def generate_image(self, idea_text: str, width: int, height: int) -> GeneratedImage:
        """Render an image for the idea text at exactly the requested size."""


class SearchProvider(ABC):
    @abstractmethod
    async def search_images(self, keyword: str, page: int) -> list[SearchResult]:
        """Return page ``page`` of results (offset page * batch size)."""

    async def resolve_thumbnail(self, url: str) -> bytes | None:
        """Backends that own their thumbnail space may serve bytes directly;
        None means the caller should fetch the URL itself."""
        return None


@dataclass
class ProviderSet:
    text: TextProvider
    vision: VisionProvider
    image: ImageProvider
    search: SearchProvider

    closers: list[Callable[[], Awaitable[None]]] = field(default_factory=list)

    async def aclose(self) -> None:
        for closer in self.closers:
            await closer()
