from .base import (
    AuthFailure,
    ContentPolicyRejection,
    GeneratedImage,
    ImageProvider,
    ProviderConfig,
    ProviderError,
    ProviderSet,
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
from .http import (
    HttpImageProvider,
    HttpSearchProvider,
    HttpTextProvider,
    HttpVisionProvider,
    default_token_env,
)
from .mock import (
    MockImageProvider,
    MockSearchProvider,
    MockTextProvider,
    MockVisionProvider,
    TextCall,
    render_placeholder_png,
)

__all__ = [
    "AuthFailure",
    "ContentPolicyRejection",
    "GeneratedImage",
    "HttpImageProvider",
    "HttpSearchProvider",
    "HttpTextProvider",
    "HttpVisionProvider",
    "ImageProvider",
    "MockImageProvider",
    "MockSearchProvider",
    "MockTextProvider",
    "MockVisionProvider",
    "ProviderConfig",
    "ProviderError",
    "ProviderSet",
    "ProviderTimeout",
    "QuotaExceeded",
    "RateLimited",
    "SearchProvider",
    "SearchResult",
    "TextCall",
    "TextProvider",
    "UnsupportedFormat",
    "UpstreamError",
    "VisionProvider",
    "call_with_retries",
    "default_token_env",
    "render_placeholder_png",
    "scrub_secrets",
]
