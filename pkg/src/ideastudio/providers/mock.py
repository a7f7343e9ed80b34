"""Deterministic mock providers.

Every mock operation is a pure function of its inputs plus a configured
seed, which turns the untestable "model quality" axis into a testable
"pipeline correctness" axis: the text mock emits schema-perfect idea and
keyword documents derived from input hashes, the image mock renders a
placeholder at exactly the requested resolution, and the search mock pages
through a stable synthetic result space.

The text mock takes an optional script hook so tests can inject malformed
output or provider failures at chosen calls; all mocks record their calls
for instrumentation.
"""

from __future__ import annotations

import hashlib
import random
import re
import struct
import zlib
from collections.abc import Callable
from dataclasses import dataclass
from functools import lru_cache

from ..format import parse_idea, serialize_idea, serialize_keywords
from ..model import (
    KEYWORD_LIMITS,
    DesignIdea,
    KeywordCategory,
    KeywordGroup,
    KeywordSet,
    Subcontent,
    validate_idea,
)
from ..prompts import PromptBundle, PromptRole
from .base import (
    GeneratedImage,
    ImageProvider,
    SearchProvider,
    SearchResult,
    TextProvider,
    UnsupportedFormat,
    VisionProvider,
)

SEARCH_BATCH = 50

_MOCK_IMAGE_HOST = "images.mock.invalid"
_MOCK_PAGE_HOST = "refs.mock.invalid"


def _digest(*parts: object) -> str:
    return hashlib.sha256("\x1f".join(str(p) for p in parts).encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Placeholder PNG rendering. Palette-type PNG with a fixed band raster per
# image size (compressed once and cached) and a per-input color palette, so
# rendering is cheap while pixel content still follows the input hash.

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_BANDS = 8


def _chunk(kind: bytes, data: bytes) -> bytes:
    return (
        struct.pack(">I", len(data))
        + kind
        + data
        + struct.pack(">I", zlib.crc32(kind + data) & 0xFFFFFFFF)
    )


@lru_cache(maxsize=32)
def _band_raster(width: int, height: int) -> bytes:
    rows = bytearray()
    for y in range(height):
        band = min(_BANDS - 1, y * _BANDS // height)
        rows += b"\x00" + bytes([band]) * width
    return zlib.compress(bytes(rows), 1)


def render_placeholder_png(width: int, height: int, color_key: str) -> bytes:
    """Banded placeholder image; the palette is derived from ``color_key``."""
    if width <= 0 or height <= 0:
        raise ValueError("image dimensions must be positive")
    palette = hashlib.sha256(color_key.encode("utf-8")).digest()[: 3 * _BANDS]
    ihdr = struct.pack(">IIBBBBB", width, height, 8, 3, 0, 0, 0)
    return (
        _PNG_SIGNATURE
        + _chunk(b"IHDR", ihdr)
        + _chunk(b"PLTE", palette)
        + _chunk(b"IDAT", _band_raster(width, height))
        + _chunk(b"IEND", b"")
    )


# ---------------------------------------------------------------------------
# Text synthesis banks. The point is not cleverness but stable, valid,
# recognizably varied documents for demos and tests.

_ADJECTIVES = (
    "Abandoned", "Overgrown", "Sunken", "Windswept", "Lantern-Lit", "Frostbound",
    "Rain-Slicked", "Sun-Bleached", "Moss-Covered", "Storm-Battered", "Gilded", "Crumbling",
)
_PLACES = (
    "Observatory", "Night Market", "Tidal Causeway", "Clockwork Foundry", "Monastery",
    "Greenhouse Arcade", "Harbor District", "Canyon Outpost", "Archive Hall",
    "Terraced Village", "Signal Station", "Botanical Atrium",
)
_SETTINGS = (
    "on a Cliffside", "beneath a Glass Dome", "in a Flooded Valley", "along an Old Trade Road",
    "at the Edge of a Salt Flat", "inside a Hollowed Mountain", "above the Cloud Line",
    "by a Glacial Lake",
)
_ART_STYLES = (
    "Painterly concept art with loose brushwork and strong value structure",
    "Clean line art with flat color blocking and soft ambient occlusion",
    "Moody digital matte painting with photographic texture overlays",
    "Gouache-inspired rendering with visible paper grain",
    "Graphic cel-shaded look with bold silhouettes",
)
_SUBCONTENT_NAMES = (
    "Central Focus", "Background", "Foreground Props", "Architecture", "Vegetation",
    "Inhabitants", "Light Sources", "Pathways", "Water Features", "Signage and Details",
)
_SUBJECTS = (
    "a tiered fountain", "a rusted loading crane", "rows of market stalls", "a toppled statue",
    "rope bridges strung between towers", "clusters of hanging lanterns", "a cracked mosaic floor",
    "stacked shipping crates", "wind-worn prayer flags", "a half-collapsed colonnade",
    "terraced planting beds", "a brass orrery", "moored flat-bottomed boats",
)
_DETAILS = (
    "draped in tattered banners", "half swallowed by ivy", "catching the last warm light",
    "worn smooth by decades of use", "dusted with fresh snow", "reflected in shallow puddles",
    "wrapped in drifting steam", "patched with mismatched timber", "ringed by scattered tools",
)
_LIGHTING = (
    "Low golden hour sun raking across surfaces, long soft shadows and gentle haze",
    "Cool overcast skylight with a single warm interior glow as counterpoint",
    "Dappled light through a broken roof, dust motes hanging in the beams",
    "Blue pre-dawn stillness with scattered lit windows and wet reflections",
    "Harsh noon light flattened by heat shimmer rising off stone",
)
_PALETTES = (
    "Desaturated teals and slate greys with rust-orange accents",
    "Warm ochres and umbers against a pale turquoise sky",
    "Deep mossy greens with cream and faded vermilion details",
    "Cold blues and violets broken by amber lantern light",
    "Sandy neutrals with washed-out cyan and sun-faded red",
)
_LAYOUTS = (
    "A strong central mass anchors the frame while smaller elements step away in overlapping planes",
    "Leading lines converge from the lower corners toward an offset focal structure",
    "Layered foreground framing opens onto a midground clearing with a distant landmark",
    "Repeating verticals establish rhythm, interrupted once at the point of interest",
)
_SHOT_ANGLES = (
    "3/4 view from a slightly raised vantage, giving depth to the main structures",
    "Wide panoramic establishing shot from eye level",
    "Low-angle view emphasizing the scale of the architecture",
    "Elevated overview looking down the central axis of the scene",
)
_TWISTS = (
    "reimagined after the reference", "leaning into the new direction",
    "with the requested changes woven through", "pushed toward a fresh variation",
)

_STOPWORDS = frozenset(
    """a an and are as at be by for from has have in into is it its of on or the their
    there this to with without while where which toward across against between during
    each more most other over some such than then under very will""".split()
)


def _rng_for(seed: int, *parts: object) -> random.Random:
    return random.Random(int(_digest(seed, *parts)[:16], 16))


def _fresh_idea(rng: random.Random, with_image: bool) -> DesignIdea:
    theme = f"{rng.choice(_ADJECTIVES)} {rng.choice(_PLACES)} {rng.choice(_SETTINGS)}"
    # The generation template pins the style when no image was supplied.
    art_style = rng.choice(_ART_STYLES) if with_image else "Painterly concept art"
    names = rng.sample(_SUBCONTENT_NAMES, 4 + rng.randrange(4))
    content = tuple(
        Subcontent(
            name=name,
            description=f"{rng.choice(_SUBJECTS).capitalize()} {rng.choice(_DETAILS)}",
        )
        for name in names
    )
    return DesignIdea(
        theme=theme,
        art_style=art_style,
        content=content,
        lighting_atmosphere=rng.choice(_LIGHTING),
        color_palette=rng.choice(_PALETTES),
        layout=rng.choice(_LAYOUTS),
        shot_angle=rng.choice(_SHOT_ANGLES),
    )


def _embedded_idea(bundle: PromptBundle) -> DesignIdea | None:
    """Recover the original idea a combine/refine/explore bundle embeds."""
    text = bundle.user_text
    if bundle.role is PromptRole.COMBINE_REFERENCE:
        start = text.find("Original Design idea:\n")
        end = text.find("\nKeyword:\n")
        if start < 0 or end < 0:
            return None
        text = text[start + len("Original Design idea:\n") : end]
    elif bundle.role is PromptRole.REFINE_INSTRUCTION:
        start = text.find("Original Design Idea:\n")
        if start < 0:
            return None
        text = text[start + len("Original Design Idea:\n") :]
    else:
        start = text.find("Image Description:\n")
        if start < 0 or "### " not in text[start:]:
            return None
        text = text[start + len("Image Description:\n") :]
    try:
        idea, _ = parse_idea(text)
    except Exception:
        return None
    return idea if not validate_idea(idea) else None


def _field_after(label: str, text: str) -> str:
    start = text.find(label)
    if start < 0:
        return ""
    rest = text[start + len(label) :].lstrip("\n")
    return rest.split("\n", 1)[0].strip()


def _mutate_idea(rng: random.Random, base: DesignIdea, bundle: PromptBundle) -> DesignIdea:
    """Derive a child idea from the embedded original, steering the touched
    parts by the bundle's keyword or instruction."""
    content = list(base.content)
    if bundle.role is PromptRole.COMBINE_REFERENCE:
        keyword = _field_after("Keyword:", bundle.user_text) or "the reference"
        wanted = {w.casefold() for w in keyword.split()}
        target = 0
        for i, sub in enumerate(content):
            haystack = f"{sub.name} {sub.description}".casefold()
            if any(w in haystack for w in wanted):
                target = i
                break
        content[target] = Subcontent(
            name=content[target].name,
            description=(
                f"{rng.choice(_SUBJECTS).capitalize()} rebuilt around {keyword.lower()}, "
                f"{rng.choice(_DETAILS)}"
            ),
        )
        theme = base.theme
    else:
        instruction = _field_after("Instructions:", bundle.user_text)
        hint = " ".join(instruction.split()[:6]).rstrip(".,;") if instruction.lower() != "none" else ""
        i = rng.randrange(len(content))
        content[i] = Subcontent(
            name=content[i].name,
            description=f"{rng.choice(_SUBJECTS).capitalize()} {rng.choice(_DETAILS)}"
            + (f", nodding to {hint.lower()}" if hint else ""),
        )
        words = base.theme.split()
        theme = " ".join([rng.choice(_ADJECTIVES)] + words[1:]) if len(words) > 1 else base.theme
    return DesignIdea(
        theme=f"{theme}",
        art_style=base.art_style,
        content=tuple(content),
        lighting_atmosphere=rng.choice((base.lighting_atmosphere, rng.choice(_LIGHTING))),
        color_palette=rng.choice((base.color_palette, rng.choice(_PALETTES))),
        layout=base.layout,
        shot_angle=base.shot_angle,
    )


def _words_of(text: str) -> list[str]:
    seen: set[str] = set()
    out: list[str] = []
    for word in re.findall(r"[A-Za-z][A-Za-z'-]+", text):
        lower = word.casefold()
        if lower in _STOPWORDS or len(lower) < 3 or lower in seen:
            continue
        seen.add(lower)
        out.append(word[0].upper() + word[1:])
    return out


def _keywords_from(text: str, limit: int) -> list[str]:
    words = _words_of(text)
    keywords = [" ".join(words[i : i + 2]) for i in range(0, len(words), 2)]
    if not keywords:
        keywords = [(text.split() or ["General"])[0].title()]
    return keywords[:limit]


def extract_keywords(idea: DesignIdea) -> KeywordSet:
    """Deterministic keyword extraction used by the text mock.

    Group names are the idea's own subcontent names, so extractions always
    correspond to their source idea."""
    groups: list[KeywordGroup] = []
    budget = KEYWORD_LIMITS[KeywordCategory.CONTENT]
    subs = list(idea.content)[:budget]
    per_group = max(1, min(3, budget // max(1, len(subs))))
    used = 0
    for sub in subs:
        take = min(per_group, budget - used)
        if take < 1:
            break
        kws = _keywords_from(f"{sub.name} {sub.description}", take)
        used += len(kws)
        groups.append(KeywordGroup(subcontent_name=sub.name, keywords=tuple(kws)))
    return KeywordSet(
        theme=tuple(_keywords_from(idea.theme, KEYWORD_LIMITS[KeywordCategory.THEME])),
        art_style=tuple(_keywords_from(idea.art_style, KEYWORD_LIMITS[KeywordCategory.ART_STYLE])),
        content=tuple(groups),
        lighting_atmosphere=tuple(
            _keywords_from(
                idea.lighting_atmosphere, KEYWORD_LIMITS[KeywordCategory.LIGHTING_ATMOSPHERE]
            )
        ),
        color_palette=tuple(
            _keywords_from(idea.color_palette, KEYWORD_LIMITS[KeywordCategory.COLOR_PALETTE])
        ),
        shot_angle=tuple(
            _keywords_from(idea.shot_angle, KEYWORD_LIMITS[KeywordCategory.SHOT_ANGLE])
        ),
    )


@dataclass(frozen=True)
class TextCall:
    """One recorded text-provider call, handed to the script hook."""

    index: int
    role: PromptRole
    user_text: str


# Returns replacement raw output (e.g. malformed text) or None for normal
# synthesis; raising a ProviderError simulates a transport failure.
TextScript = Callable[[TextCall], "str | None"]


class MockTextProvider(TextProvider):
    def __init__(self, seed: int = 0, script: TextScript | None = None):
        self.seed = seed
        self.script = script
        self.calls: list[TextCall] = []

    async def generate_text(self, bundle: PromptBundle) -> str:
        call = TextCall(index=len(self.calls), role=bundle.role, user_text=bundle.user_text)
        self.calls.append(call)
        if self.script is not None:
            scripted = self.script(call)
            if scripted is not None:
                return scripted
        if bundle.role is PromptRole.KEYWORD_EXTRACTION:
            return self._keyword_document(bundle)
        return self._idea_document(bundle)

    def _idea_document(self, bundle: PromptBundle) -> str:
        rng = _rng_for(self.seed, bundle.role.value, bundle.user_text)
        base = None
        if bundle.role in (PromptRole.COMBINE_REFERENCE, PromptRole.REFINE_INSTRUCTION):
            base = _embedded_idea(bundle)
        if base is not None:
            idea = _mutate_idea(rng, base, bundle)
        else:
            idea = _fresh_idea(rng, with_image="Image Description:" in bundle.user_text)
        return serialize_idea(idea)

    def _keyword_document(self, bundle: PromptBundle) -> str:
        marker = "Design Idea:\n"
        start = bundle.user_text.find(marker)
        source = bundle.user_text[start + len(marker) :] if start >= 0 else bundle.user_text
        try:
            idea, _ = parse_idea(source)
        except Exception:
            idea = _fresh_idea(_rng_for(self.seed, "fallback", bundle.user_text), True)
        return serialize_keywords(extract_keywords(idea))


class MockVisionProvider(VisionProvider):
    def __init__(self, seed: int = 0):
        self.seed = seed
        self.calls: list[str] = []

    async def caption_image(self, image: bytes | str) -> str:
        if isinstance(image, bytes):
            if not image:
                raise UnsupportedFormat("empty image")
            key = hashlib.sha256(image).hexdigest()
        else:
            if not image.strip():
                raise UnsupportedFormat("empty image URL")
            key = _digest(self.seed, image)
        self.calls.append(key)
        return f"mock caption of {key[:12]}"


class MockImageProvider(ImageProvider):
    def __init__(self, seed: int = 0):
        self.seed = seed
        self.calls: list[tuple[str, int, int]] = []

    async def generate_image(self, idea_text: str, width: int, height: int) -> GeneratedImage:
        if not idea_text.strip():
            raise ValueError("idea_text must be nonempty")
        self.calls.append((idea_text, width, height))
        data = render_placeholder_png(width, height, _digest(self.seed, idea_text))
        return GeneratedImage(data=data, width=width, height=height)


class MockSearchProvider(SearchProvider):
    def __init__(self, seed: int = 0):
        self.seed = seed
        self.calls: list[tuple[str, int]] = []

    async def search_images(self, keyword: str, page: int) -> list[SearchResult]:
        if not keyword.strip():
            raise ValueError("keyword must be nonempty")
        if page < 0:
            raise ValueError("page must be >= 0")
        self.calls.append((keyword, page))
        slug = re.sub(r"[^a-z0-9]+", "-", keyword.casefold()).strip("-") or "keyword"
        results = []
        for i in range(SEARCH_BATCH):
            n = page * SEARCH_BATCH + i
            key = _digest(self.seed, keyword, n)
            results.append(
                SearchResult(
                    image_url=f"https://{_MOCK_IMAGE_HOST}/{key[:20]}.png",
                    thumbnail_url=f"https://{_MOCK_IMAGE_HOST}/{key[:20]}/thumb.png",
                    source_page_url=f"https://{_MOCK_PAGE_HOST}/{slug}/{n}",
                    title=f"{keyword} reference {n + 1}",
                    width=640 + int(key[0:2], 16) * 4,
                    height=480 + int(key[2:4], 16) * 3,
                )
            )
        return results

    async def resolve_thumbnail(self, url: str) -> bytes | None:
        if _MOCK_IMAGE_HOST in url:
            return render_placeholder_png(128, 96, _digest(self.seed, "thumb", url))
        return None
