"""Domain types shared by every part of the ideation service.

A design idea is a seven-section structured description of one environment
concept. Ideas live on cards; cards carry a keyword extraction, a generated
image reference, and a lineage edge recording how they were derived
(brainstorm root, combined with a reference, refined by instruction, or
explored from an earlier idea). Sessions collect cycles of cards into an
acyclic lineage graph.

All types here are immutable values; session mutation happens only inside
the session store.
"""

from __future__ import annotations

import math
import os
import threading
import time
from datetime import datetime, timezone
from enum import Enum

from pydantic import BaseModel, ConfigDict, model_validator

CARD_IMAGE_WIDTH = 1792
CARD_IMAGE_HEIGHT = 1024

SEARCH_PAGE_SIZE = 50

MAX_KEYWORD_WORDS = 5
TITLE_MAX_CHARS = 80

_id_lock = threading.Lock()
_id_last_ns = 0


def new_id(prefix: str) -> str:
    """Opaque, lexicographically sortable, time-ordered identifier.

    The time component is forced strictly monotonic within the process so
    that id order always agrees with creation order.
    """
    global _id_last_ns
    with _id_lock:
        now = time.time_ns()
        if now <= _id_last_ns:
            now = _id_last_ns + 1
        _id_last_ns = now
    return f"{prefix}{now:016x}{os.urandom(3).hex()}"


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


def make_creative_score(raw: float) -> float:
    """Clamp a creativity level into [0, 1].

    Scores arrive from config files and UI sliders, so out-of-range input
    is clamped rather than rejected to keep the pipeline total.
    """
    value = float(raw)
    if not math.isfinite(value):
        raise ValueError(f"creative score must be finite, got {raw!r}")
    return min(1.0, max(0.0, value))


def normalize_name(name: str) -> str:
    """Whitespace-collapsed, case-insensitive form used to match names."""
    return " ".join(name.split()).casefold()


def derive_title(theme: str, limit: int = TITLE_MAX_CHARS) -> str:
    """Card title: the idea's theme, truncated at a word boundary."""
    theme = " ".join(theme.split())
    if len(theme) <= limit:
        return theme
    cut = theme.rfind(" ", 0, limit + 1)
    if cut <= 0:
        cut = limit
    return theme[:cut].rstrip(" ,;:.")


class Violation(BaseModel):
    """One broken invariant, reported as a value rather than an error."""

    model_config = ConfigDict(frozen=True)

    field: str
    message: str


class Subcontent(BaseModel):
    """A named element of an idea's Content section."""

    model_config = ConfigDict(frozen=True)

    name: str
    description: str


class DesignIdea(BaseModel):
    """Seven-section description of one environment concept.

    Construction is deliberately permissive so that model output can be
    represented even when malformed; ``validate_idea`` is the contract
    enforcement point.
    """

    model_config = ConfigDict(frozen=True)

    theme: str
    art_style: str
    content: tuple[Subcontent, ...]
    lighting_atmosphere: str
    color_palette: str
    layout: str
    shot_angle: str


# (display name, DesignIdea field) in canonical section order.
IDEA_SECTIONS: tuple[tuple[str, str], ...] = (
    ("Theme", "theme"),
    ("Art Style", "art_style"),
    ("Content", "content"),
    ("Lighting and Atmosphere", "lighting_atmosphere"),
    ("Color Palette", "color_palette"),
    ("Layout", "layout"),
    ("Shot Angle", "shot_angle"),
)


def validate_idea(idea: DesignIdea) -> list[Violation]:
    """Check the seven-section contract; empty result means valid.

    Violations come back in deterministic order: section order first, then
    subcontent order within Content.
    """
    violations: list[Violation] = []
    for display, field in IDEA_SECTIONS:
        if field == "content":
            if not idea.content:
                violations.append(Violation(field="content", message="Content has no subcontents"))
                continue
            seen: dict[str, int] = {}
            for i, sub in enumerate(idea.content):
                if not sub.name.strip():
                    violations.append(
                        Violation(field=f"content[{i}].name", message="subcontent name is empty")
                    )
                    continue
                if not sub.description.strip():
                    violations.append(
                        Violation(
                            field=f"content[{i}].description",
                            message=f"subcontent {sub.name!r} has an empty description",
                        )
                    )
                key = normalize_name(sub.name)
                if key in seen:
                    violations.append(
                        Violation(
                            field=f"content[{i}].name",
                            message=f"duplicate subcontent name {sub.name!r} (first at index {seen[key]})",
                        )
                    )
                else:
                    seen[key] = i
        else:
            if not getattr(idea, field).strip():
                violations.append(Violation(field=field, message=f"{display} is empty"))
    return violations


class KeywordCategory(str, Enum):
    """The six searchable keyword categories. Layout is deliberately absent."""

    THEME = "theme"
    ART_STYLE = "art_style"
    CONTENT = "content"
    LIGHTING_ATMOSPHERE = "lighting_atmosphere"
    COLOR_PALETTE = "color_palette"
    SHOT_ANGLE = "shot_angle"


KEYWORD_LIMITS: dict[KeywordCategory, int] = {
    KeywordCategory.THEME: 3,
    KeywordCategory.ART_STYLE: 3,
    KeywordCategory.CONTENT: 20,
    KeywordCategory.LIGHTING_ATMOSPHERE: 5,
    KeywordCategory.COLOR_PALETTE: 5,
    KeywordCategory.SHOT_ANGLE: 3,
}


class KeywordGroup(BaseModel):
    """Content keywords for one subcontent of the source idea."""

    model_config = ConfigDict(frozen=True)

    subcontent_name: str
    keywords: tuple[str, ...] = ()


class KeywordSet(BaseModel):
    """Six-category keyword extraction of a design idea."""

    model_config = ConfigDict(frozen=True)

    theme: tuple[str, ...] = ()
    art_style: tuple[str, ...] = ()
    content: tuple[KeywordGroup, ...] = ()
    lighting_atmosphere: tuple[str, ...] = ()
    color_palette: tuple[str, ...] = ()
    shot_angle: tuple[str, ...] = ()

    def all_keywords(self) -> list[str]:
        flat = list(self.theme) + list(self.art_style)
        for group in self.content:
            flat.extend(group.keywords)
        flat += list(self.lighting_atmosphere) + list(self.color_palette) + list(self.shot_angle)
        return flat


def _check_keyword(field: str, keyword: str, out: list[Violation]) -> None:
    if not keyword.strip():
        out.append(Violation(field=field, message="keyword is empty"))
        return
    words = len(keyword.split())
    if words > MAX_KEYWORD_WORDS:
        out.append(
            Violation(
                field=field,
                message=f"keyword {keyword!r} has {words} words (limit {MAX_KEYWORD_WORDS})",
            )
        )


def validate_keywords(kw: KeywordSet) -> list[Violation]:
    """Check per-category count limits and per-keyword word limits."""
    violations: list[Violation] = []
    flat_categories = (
        (KeywordCategory.THEME, kw.theme),
        (KeywordCategory.ART_STYLE, kw.art_style),
    )
    for category, keywords in flat_categories:
        limit = KEYWORD_LIMITS[category]
        if len(keywords) > limit:
            violations.append(
                Violation(
                    field=category.value,
                    message=f"{len(keywords)} keywords exceed the limit of {limit}",
                )
            )
        for i, keyword in enumerate(keywords):
            _check_keyword(f"{category.value}[{i}]", keyword, violations)

    total_content = sum(len(group.keywords) for group in kw.content)
    if total_content > KEYWORD_LIMITS[KeywordCategory.CONTENT]:
        violations.append(
            Violation(
                field="content",
                message=(
                    f"{total_content} keywords across subcontents exceed the limit of "
                    f"{KEYWORD_LIMITS[KeywordCategory.CONTENT]}"
                ),
            )
        )
    for g, group in enumerate(kw.content):
        for i, keyword in enumerate(group.keywords):
            _check_keyword(f"content[{g}].keywords[{i}]", keyword, violations)

    tail_categories = (
        (KeywordCategory.LIGHTING_ATMOSPHERE, kw.lighting_atmosphere),
        (KeywordCategory.COLOR_PALETTE, kw.color_palette),
        (KeywordCategory.SHOT_ANGLE, kw.shot_angle),
    )
    for category, keywords in tail_categories:
        limit = KEYWORD_LIMITS[category]
        if len(keywords) > limit:
            violations.append(
                Violation(
                    field=category.value,
                    message=f"{len(keywords)} keywords exceed the limit of {limit}",
                )
            )
        for i, keyword in enumerate(keywords):
            _check_keyword(f"{category.value}[{i}]", keyword, violations)
    return violations


def unmatched_keyword_groups(kw: KeywordSet, idea: DesignIdea) -> list[str]:
    """Keyword subcontent names that match no subcontent of the source idea.

    Unmatched names are flagged rather than dropped: model output drifts,
    and silently discarding data would hide it.
    """
    known = {normalize_name(sub.name) for sub in idea.content}
    return [g.subcontent_name for g in kw.content if normalize_name(g.subcontent_name) not in known]


class LineageKind(str, Enum):
    BRAINSTORM_ROOT = "brainstorm_root"
    COMBINED_WITH_REFERENCE = "combined_with_reference"
    REFINED_BY_INSTRUCTION = "refined_by_instruction"
    EXPLORED_FROM = "explored_from"


class LineageEdge(BaseModel):
    """Provenance of one card: how and from what it was derived."""

    model_config = ConfigDict(frozen=True)

    origin_kind: LineageKind
    parent_card_id: str | None = None
    keyword: str | None = None
    reference_image_id: str | None = None
    instruction: str | None = None
    creative_score: float

    @model_validator(mode="after")
    def _check_presence(self) -> "LineageEdge":
        kind = self.origin_kind
        if not 0.0 <= self.creative_score <= 1.0:
            raise ValueError("creative_score must be within [0, 1]")
        if kind is LineageKind.BRAINSTORM_ROOT:
            if self.parent_card_id is not None:
                raise ValueError("a brainstorm root has no parent card")
        elif self.parent_card_id is None:
            raise ValueError(f"{kind.value} requires parent_card_id")
        if kind is LineageKind.COMBINED_WITH_REFERENCE:
            if not self.keyword or not self.reference_image_id:
                raise ValueError("combined_with_reference requires keyword and reference_image_id")
        else:
            if self.keyword is not None or self.reference_image_id is not None:
                raise ValueError(f"{kind.value} carries no keyword or reference image")
        if kind is LineageKind.REFINED_BY_INSTRUCTION:
            if not (self.instruction or "").strip():
                raise ValueError("refined_by_instruction requires a nonempty instruction")
        elif kind in (LineageKind.BRAINSTORM_ROOT, LineageKind.COMBINED_WITH_REFERENCE):
            if self.instruction is not None:
                raise ValueError(f"{kind.value} carries no instruction")
        return self


class ImageRef(BaseModel):
    """Stored image blob plus its pixel dimensions."""

    model_config = ConfigDict(frozen=True)

    blob_id: str
    width: int
    height: int


class IdeaCard(BaseModel):
    """One idea with its extraction, image, provenance, and failure state.

    ``keywords`` and ``image`` are None while pending; each transitions
    pending -> present exactly once (refinement makes new cards, nothing is
    regenerated in place). ``failure`` is set when keyword extraction or
    image generation failed; the card is retained so the UI can offer retry.
    """

    model_config = ConfigDict(frozen=True)

    id: str
    title: str
    idea: DesignIdea
    keywords: KeywordSet | None = None
    keyword_warnings: tuple[str, ...] = ()
    image: ImageRef | None = None
    lineage: LineageEdge
    created_at: datetime
    failure: str | None = None

    @model_validator(mode="after")
    def _check_image_dims(self) -> "IdeaCard":
        if self.image is not None:
            if (self.image.width, self.image.height) != (CARD_IMAGE_WIDTH, CARD_IMAGE_HEIGHT):
                raise ValueError(
                    f"card images are {CARD_IMAGE_WIDTH}x{CARD_IMAGE_HEIGHT}, "
                    f"got {self.image.width}x{self.image.height}"
                )
        return self


class CycleKind(str, Enum):
    BRAINSTORM = "brainstorm"
    EXPLORE_MORE = "explore_more"


class CycleInput(BaseModel):
    """What seeded a cycle: free text, an uploaded image, a source card."""

    model_config = ConfigDict(frozen=True)

    instruction: str | None = None
    source_image: str | None = None  # blob id
    source_card_id: str | None = None

    @model_validator(mode="after")
    def _check_nonempty(self) -> "CycleInput":
        if not ((self.instruction or "").strip() or self.source_image or self.source_card_id):
            raise ValueError("cycle input requires an instruction, an image, or a source card")
        return self


class Cycle(BaseModel):
    """One brainstorm or explore-more fan-out; owns the cards it produced."""

    model_config = ConfigDict(frozen=True)

    id: str
    session_id: str
    kind: CycleKind
    input: CycleInput
    card_ids: tuple[str, ...] = ()

    @model_validator(mode="after")
    def _check_source(self) -> "Cycle":
        if self.kind is CycleKind.EXPLORE_MORE and not self.input.source_card_id:
            raise ValueError("an explore-more cycle requires a source card")
        if self.kind is CycleKind.BRAINSTORM and self.input.source_card_id:
            raise ValueError("a brainstorm cycle has no source card")
        return self


class SearchQuery(BaseModel):
    """One recorded reference search."""

    model_config = ConfigDict(frozen=True)

    keyword: str
    page: int
    at: datetime


class SessionCounters(BaseModel):
    model_config = ConfigDict(frozen=True)

    cycles: int = 0
    ideas_generated: int = 0
    ideas_used: int = 0


class Session(BaseModel):
    """Persisted container of cycles, cards, searches, and usage counters."""

    model_config = ConfigDict(frozen=True)

    id: str
    name: str
    created_at: datetime
    cycles: tuple[Cycle, ...] = ()
    cards: dict[str, IdeaCard] = {}
    used_card_ids: frozenset[str] = frozenset()
    search_history: tuple[SearchQuery, ...] = ()
    counters: SessionCounters = SessionCounters()


def recount(session: Session) -> SessionCounters:
    """Counters recomputed from scratch; must always equal the stored ones."""
    return SessionCounters(
        cycles=len(session.cycles),
        ideas_generated=len(session.cards),
        ideas_used=len(session.used_card_ids),
    )


def lineage_violations(session: Session) -> list[str]:
    """Structural checks over the lineage graph.

    Every parent must exist and have been created strictly earlier than its
    child; with at most one parent per card this makes the graph a forest
    of acyclic chains.
    """
    problems: list[str] = []
    for card in session.cards.values():
        parent_id = card.lineage.parent_card_id
        if parent_id is None:
            continue
        parent = session.cards.get(parent_id)
        if parent is None:
            problems.append(f"card {card.id} has dangling parent {parent_id}")
        elif parent.id >= card.id:
            problems.append(f"card {card.id} does not strictly follow its parent {parent_id}")
    return problems
