"""HTTP+JSON provider clients.

One client per capability, each mapping its backend's public API into the
neutral provider types: a chat-completions style endpoint for text and
vision, an image-generation endpoint returning base64 payloads, and an
image-search endpoint with count/offset paging.

Credentials come from environment variables named in the config and are
scrubbed from every error payload; retryable failures are retried with
exponential backoff up to the configured limit, honoring Retry-After.
"""

from __future__ import annotations

import base64
import binascii
import os

import anyio
import httpx

from ..prompts import PromptBundle
from .base import (
    AuthFailure,
    ContentPolicyRejection,
    GeneratedImage,
    ImageProvider,
    ProviderConfig,
    ProviderError,
    ProviderTimeout,
    QuotaExceeded,
    RateLimited,
    SearchProvider,
    SearchResult,
    TextProvider,
    UnsupportedFormat,
    UpstreamError,
    VisionProvider,
    call_with_retries,
    scrub_secrets,
)

_DEFAULT_TOKEN_ENVS = {
    "text": "AIDEATION_TEXT_TOKEN",
    "vision": "AIDEATION_VISION_TOKEN",
    "image": "AIDEATION_IMAGE_TOKEN",
    "search": "AIDEATION_SEARCH_TOKEN",
}


def default_token_env(capability: str) -> str:
    return _DEFAULT_TOKEN_ENVS[capability]


def _sniff_media_type(data: bytes) -> str:
    if data.startswith(b"\x89PNG\r\n\x1a\n"):
        return "image/png"
    if data.startswith(b"\xff\xd8\xff"):
        return "image/jpeg"
    if data[:4] == b"RIFF" and data[8:12] == b"WEBP":
        return "image/webp"
    raise UnsupportedFormat("unrecognized image format")


class _HttpProviderBase:
    def __init__(self, config: ProviderConfig, client: httpx.AsyncClient | None = None):
        self.config = config
        self._client = client or httpx.AsyncClient(timeout=config.timeout)
        self._limiter = anyio.Semaphore(config.max_concurrency)

    async def aclose(self) -> None:
        await self._client.aclose()

    def _token(self) -> str:
        # Resolved per call, and checked before any network traffic.
        token = os.environ.get(self.config.auth_token_env, "")
        if not token:
            raise AuthFailure(
                f"credential environment variable {self.config.auth_token_env!r} is unset"
            )
        return token

    def _scrub(self, text: str) -> str:
        return scrub_secrets(text, [os.environ.get(self.config.auth_token_env, "")])

    def _raise_for_status(self, response: httpx.Response) -> None:
        status = response.status_code
        if status < 400:
            return
        body = self._scrub(response.text[:2000])
        if status in (401, 403):
            if "quota" in body.lower():
                raise QuotaExceeded(f"quota exhausted: {body[:200]}")
            raise AuthFailure(f"authentication rejected ({status})")
        if status == 429:
            try:
                retry_after = float(response.headers.get("Retry-After", "0"))
            except ValueError:
                retry_after = 0.0
            raise RateLimited(retry_after=retry_after)
        if status == 400 and "content_policy" in body:
            raise ContentPolicyRejection(body[:200])
        raise UpstreamError(status, body)

    async def _request(self, method: str, url: str, **kwargs) -> httpx.Response:
        async def attempt() -> httpx.Response:
            async with self._limiter:
                try:
                    response = await self._client.request(method, url, **kwargs)
                except httpx.TimeoutException as err:
                    raise ProviderTimeout(str(err)) from err
                except httpx.HTTPError as err:
                    raise UpstreamError(0, self._scrub(str(err))) from err
                self._raise_for_status(response)
                return response

        return await call_with_retries(attempt, max_retries=self.config.max_retries)

    def _json(self, response: httpx.Response) -> dict:
        try:
            return response.json()
        except ValueError as err:
            raise UpstreamError(
                response.status_code, f"non-JSON response: {self._scrub(response.text[:200])}"
            ) from err


class HttpTextProvider(_HttpProviderBase, TextProvider):
    """Chat-completions client; the prompt bundle maps to one system plus
    one user message."""

    async def generate_text(self, bundle: PromptBundle) -> str:
        token = self._token()
        payload = {
            "model": self.config.model_name,
            "temperature": bundle.temperature_hint,
            "messages": [
                {"role": "system", "content": bundle.system_text},
                {"role": "user", "content": bundle.user_text},
            ],
            **self.config.options,
        }
        response = await self._request(
            "POST",
            f"{self.config.base_url.rstrip('/')}/chat/completions",
            json=payload,
            headers={"Authorization": f"Bearer {token}"},
        )
        data = self._json(response)
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as err:
            raise UpstreamError(response.status_code, "malformed completion payload") from err


_CAPTION_PROMPT = (
    "Describe this image for a concept artist: the key visual elements, "
    "materials, lighting, color, and overall mood, in a few sentences."
)


class HttpVisionProvider(_HttpProviderBase, VisionProvider):
    """Vision captioning over the chat-completions multimodal content form.

    URLs are passed through untouched; raw bytes are inlined as a data URL.
    """

    async def caption_image(self, image: bytes | str) -> str:
        token = self._token()
        if isinstance(image, bytes):
            if not image:
                raise UnsupportedFormat("empty image")
            media_type = _sniff_media_type(image)
            url = f"data:{media_type};base64,{base64.b64encode(image).decode('ascii')}"
        else:
            if not image.strip():
                raise UnsupportedFormat("empty image URL")
            url = image
        payload = {
            "model": self.config.model_name,
            "messages": [
                {
                    "role": "user",
                    "content": [
                        {"type": "text", "text": _CAPTION_PROMPT},
                        {"type": "image_url", "image_url": {"url": url}},
                    ],
                }
            ],
            **self.config.options,
        }
        response = await self._request(
            "POST",
            f"{self.config.base_url.rstrip('/')}/chat/completions",
            json=payload,
            headers={"Authorization": f"Bearer {token}"},
        )
        data = self._json(response)
        try:
            caption = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as err:
            raise UpstreamError(response.status_code, "malformed caption payload") from err
        if not caption.strip():
            raise UpstreamError(response.status_code, "empty caption")
        return caption


class HttpImageProvider(_HttpProviderBase, ImageProvider):
    async def generate_image(self, idea_text: str, width: int, height: int) -> GeneratedImage:
        if not idea_text.strip():
            raise ValueError("idea_text must be nonempty")
        token = self._token()
        payload = {
            "model": self.config.model_name,
            "prompt": idea_text,
            "size": f"{width}x{height}",
            "response_format": "b64_json",
            "n": 1,
            **self.config.options,
        }
        response = await self._request(
            "POST",
            f"{self.config.base_url.rstrip('/')}/images/generations",
            json=payload,
            headers={"Authorization": f"Bearer {token}"},
        )
        data = self._json(response)
        try:
            encoded = data["data"][0]["b64_json"]
            raw = base64.b64decode(encoded)
        except (KeyError, IndexError, TypeError, binascii.Error) as err:
            raise UpstreamError(response.status_code, "malformed image payload") from err
        return GeneratedImage(
            data=raw, width=width, height=height, media_type=_sniff_media_type(raw)
        )


class HttpSearchProvider(_HttpProviderBase, SearchProvider):
    """Image-search client with count/offset paging (50 per page)."""

    BATCH = 50

    async def search_images(self, keyword: str, page: int) -> list[SearchResult]:
        if not keyword.strip():
            raise ValueError("keyword must be nonempty")
        if page < 0:
            raise ValueError("page must be >= 0")
        token = self._token()
        response = await self._request(
            "GET",
            f"{self.config.base_url.rstrip('/')}/images/search",
            params={"q": keyword, "count": self.BATCH, "offset": page * self.BATCH},
            headers={"Ocp-Apim-Subscription-Key": token},
        )
        data = self._json(response)
        items = data.get("value", [])
        results: list[SearchResult] = []
        for item in items[: self.BATCH]:
            try:
                results.append(
                    SearchResult(
                        image_url=item["contentUrl"],
                        thumbnail_url=item.get("thumbnailUrl", item["contentUrl"]),
                        source_page_url=item.get("hostPageUrl", item["contentUrl"]),
                        title=item.get("name", keyword),
                        width=int(item.get("width", 0) or 0),
                        height=int(item.get("height", 0) or 0),
                    )
                )
            except KeyError:
                continue  # skip entries without a usable image URL
        return results


__all__ = [
    "HttpImageProvider",
    "HttpSearchProvider",
    "HttpTextProvider",
    "HttpVisionProvider",
    "ProviderError",
    "default_token_env",
]
