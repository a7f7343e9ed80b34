"""Parse and serialize the two structured text formats the model roles emit.

Ideas arrive as seven "###" sections; keyword extractions arrive as six
"###" categories with "####" subcontent groups and bulleted keywords.
Model output drifts, so parsing is tolerant by default: recoverable
deviations are normalized away and reported as warnings, while anything
unrecoverable raises a typed error the orchestrator's retry loop can act
on. Strict mode turns the recoveries into errors; tests use it to pin the
grammar down.
"""

from __future__ import annotations

import re

from pydantic import BaseModel, ConfigDict

from .model import (
    IDEA_SECTIONS,
    DesignIdea,
    KeywordCategory,
    KeywordGroup,
    KeywordSet,
    Subcontent,
    validate_idea,
    validate_keywords,
)


class IdeaFormatError(ValueError):
    """Base for unrecoverable structured-text failures."""


class MissingSectionError(IdeaFormatError):
    def __init__(self, section: str):
        self.section = section
        super().__init__(f"missing section {section!r}")


class EmptyContentError(IdeaFormatError):
    def __init__(self) -> None:
        super().__init__("Content section has no subcontents")


class MalformedHeadingError(IdeaFormatError):
    def __init__(self, line: int, heading: str):
        self.line = line
        self.heading = heading
        super().__init__(f"line {line}: heading {heading!r} matches no known section")


class MissingCategoryError(IdeaFormatError):
    def __init__(self, category: str):
        self.category = category
        super().__init__(f"missing keyword category {category!r}")


class InvalidIdeaError(IdeaFormatError):
    def __init__(self, violations):
        self.violations = list(violations)
        details = "; ".join(v.message for v in self.violations)
        super().__init__(f"idea fails validation: {details}")


class InvalidKeywordsError(IdeaFormatError):
    def __init__(self, violations):
        self.violations = list(violations)
        details = "; ".join(v.message for v in self.violations)
        super().__init__(f"keyword set fails validation: {details}")


class ParseWarning(BaseModel):
    model_config = ConfigDict(frozen=True)

    line: int
    message: str


class ParseDiagnostics(BaseModel):
    """Warnings gathered while parsing; ``recovered`` is set iff any
    tolerant-recovery rule fired (strict mode would have rejected)."""

    warnings: list[ParseWarning] = []
    recovered: bool = False

    def warn(self, line: int, message: str, *, recovery: bool = False) -> None:
        self.warnings.append(ParseWarning(line=line, message=message))
        if recovery:
            self.recovered = True


# Normalized heading text -> DesignIdea field. Includes the spelling drift
# the model roles are known to produce ("&", "Color Pallete").
_SECTION_ALIASES: dict[str, str] = {}
for _display, _field in IDEA_SECTIONS:
    _SECTION_ALIASES[_display.casefold()] = _field
_SECTION_ALIASES.update(
    {
        "lighting & atmosphere": "lighting_atmosphere",
        "lighting atmosphere": "lighting_atmosphere",
        "colour palette": "color_palette",
        "color pallete": "color_palette",
        "colors": "color_palette",
        "artstyle": "art_style",
    }
)

_HEADING_RE = re.compile(r"^(#+)\s*(.*?)\s*$")
_BOLD_SUBCONTENT_RE = re.compile(r"^[-*]\s+\*\*(.+?)\*\*\s*:?\s*(.*)$")
_PLAIN_SUBCONTENT_RE = re.compile(r"^(?![#\-*])([^:]{1,80}?)\s*:\s*(.*)$")
_SUBCONTENT_LABEL_RE = re.compile(r"^subcontent\s*\d+\s*:?\s*$", re.IGNORECASE)
_SUBCONTENT_PREFIX_RE = re.compile(r"^subcontent\s*\d+\s*:\s*", re.IGNORECASE)


def _normalize_heading(text: str) -> str:
    text = text.strip().strip("*").strip()
    text = text.rstrip(":").strip()
    return " ".join(text.split()).casefold()


def _split_lines(text: str) -> list[str]:
    return text.replace("\r\n", "\n").replace("\r", "\n").split("\n")


def _collect_sections(
    lines: list[str],
    diagnostics: ParseDiagnostics,
    known: dict[str, str],
    strict: bool,
) -> dict[str, list[tuple[int, str]]]:
    """Group lines under their normalized "###" headings.

    Returns field -> [(line number, text), ...]. Unknown headings are
    skipped with their block (tolerant) or raise (strict).
    """
    sections: dict[str, list[tuple[int, str]]] = {}
    current: str | None = None
    skipping = False
    for lineno, raw in enumerate(lines, start=1):
        match = _HEADING_RE.match(raw)
        if match and match.group(2):
            title = _normalize_heading(match.group(2))
            field = known.get(title)
            if field is None:
                if strict:
                    raise MalformedHeadingError(lineno, raw.strip())
                diagnostics.warn(
                    lineno, f"unknown heading {raw.strip()!r} skipped", recovery=True
                )
                current = None
                skipping = True
                continue
            if len(match.group(1)) != 3:
                diagnostics.warn(
                    lineno,
                    f"heading {raw.strip()!r} is not level 3; accepted",
                    recovery=True,
                )
            if field in sections:
                diagnostics.warn(
                    lineno, f"duplicate section {match.group(2)!r}; appending", recovery=True
                )
            sections.setdefault(field, [])
            current = field
            skipping = False
            continue
        if current is not None:
            sections[current].append((lineno, raw))
        elif raw.strip() and not skipping:
            diagnostics.warn(lineno, f"text before first heading ignored: {raw.strip()!r}")
    return sections


def _section_text(entries: list[tuple[int, str]]) -> str:
    text_lines = [line.rstrip() for _, line in entries]
    while text_lines and not text_lines[0]:
        text_lines.pop(0)
    while text_lines and not text_lines[-1]:
        text_lines.pop()
    return "\n".join(text_lines)


def _parse_subcontents(
    entries: list[tuple[int, str]], diagnostics: ParseDiagnostics
) -> list[Subcontent]:
    subs: list[tuple[str, list[str]]] = []
    for lineno, raw in entries:
        line = raw.rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        name: str | None = None
        description = ""
        match = _BOLD_SUBCONTENT_RE.match(stripped)
        if match:
            name, description = match.group(1), match.group(2)
        else:
            candidate = _SUBCONTENT_PREFIX_RE.sub("", stripped)
            match = _PLAIN_SUBCONTENT_RE.match(candidate)
            if match and not _SUBCONTENT_LABEL_RE.match(match.group(1) + ":"):
                name, description = match.group(1), match.group(2)
            elif candidate != stripped:
                # "SubcontentN:" label with no real name after it; keep the
                # label as the name so the element is not lost.
                label = stripped[: len(stripped) - len(candidate)].rstrip(": \t")
                name, description = label, candidate
        if name is not None:
            name = name.strip().strip("*").rstrip(":").strip()
        if name:
            subs.append((name, [description.strip()]))
        elif subs:
            subs[-1][1].append(stripped)
        else:
            diagnostics.warn(
                lineno, f"content line before any subcontent ignored: {stripped!r}", recovery=True
            )
    return [
        Subcontent(name=name, description="\n".join(part for part in parts if part))
        for name, parts in subs
    ]


def parse_idea(text: str, strict: bool = False) -> tuple[DesignIdea, ParseDiagnostics]:
    """Parse raw model output into a DesignIdea.

    Accepts both observed Content shapes: plain "Name: description" lines
    and "- **Name**: description" bullet lines. Leading "SubcontentN:"
    labels, bold markers, and trailing colons are normalization-stripped.
    """
    diagnostics = ParseDiagnostics()
    known = dict(_SECTION_ALIASES)
    sections = _collect_sections(_split_lines(text), diagnostics, known, strict)

    for display, field in IDEA_SECTIONS:
        if field not in sections:
            raise MissingSectionError(display)

    content = _parse_subcontents(sections["content"], diagnostics)
    if not content:
        raise EmptyContentError()

    fields: dict[str, object] = {"content": tuple(content)}
    for display, field in IDEA_SECTIONS:
        if field == "content":
            continue
        value = _section_text(sections[field])
        if not value:
            diagnostics.warn(0, f"section {display!r} is empty")
        fields[field] = value
    return DesignIdea(**fields), diagnostics


def serialize_idea(idea: DesignIdea) -> str:
    """Canonical form: seven "###" sections in order, one subcontent per line."""
    violations = validate_idea(idea)
    if violations:
        raise InvalidIdeaError(violations)
    out: list[str] = []
    for display, field in IDEA_SECTIONS:
        out.append(f"### {display}")
        if field == "content":
            for sub in idea.content:
                out.append(f"{sub.name}: {sub.description}")
        else:
            out.append(getattr(idea, field))
    return "\n".join(out) + "\n"


# Keyword documents use the same category names minus Layout, which the
# extraction role is told to omit; a Layout block is dropped with a warning.
_CATEGORY_ORDER: tuple[tuple[str, KeywordCategory], ...] = (
    ("Theme", KeywordCategory.THEME),
    ("Art Style", KeywordCategory.ART_STYLE),
    ("Content", KeywordCategory.CONTENT),
    ("Lighting and Atmosphere", KeywordCategory.LIGHTING_ATMOSPHERE),
    ("Color Palette", KeywordCategory.COLOR_PALETTE),
    ("Shot Angle", KeywordCategory.SHOT_ANGLE),
)

_BULLET_RE = re.compile(r"^[*\-+]\s+(.*)$")


def _clean_keyword(text: str) -> str:
    text = text.strip()
    if text.startswith("**") and text.endswith("**") and len(text) > 4:
        text = text[2:-2].strip()
    return text


def parse_keywords(text: str, strict: bool = False) -> tuple[KeywordSet, ParseDiagnostics]:
    """Parse raw extraction output into a KeywordSet.

    "###" headings select categories, "####" headings open subcontent
    groups inside Content, and "*" or "-" bullets are keywords.
    """
    diagnostics = ParseDiagnostics()
    categories: dict[KeywordCategory, list[str]] = {}
    groups: list[tuple[str, list[str]]] = []
    known = {display.casefold(): cat for display, cat in _CATEGORY_ORDER}
    known["color pallete"] = KeywordCategory.COLOR_PALETTE
    known["colour palette"] = KeywordCategory.COLOR_PALETTE
    known["lighting & atmosphere"] = KeywordCategory.LIGHTING_ATMOSPHERE
    known["lighting atmosphere"] = KeywordCategory.LIGHTING_ATMOSPHERE

    current: KeywordCategory | None = None
    current_group: list[str] | None = None
    skipping = False

    for lineno, raw in enumerate(_split_lines(text), start=1):
        line = raw.rstrip()
        if not line.strip():
            continue
        match = _HEADING_RE.match(line)
        if match and match.group(2):
            level, title_raw = len(match.group(1)), match.group(2)
            title = _normalize_heading(title_raw)
            if level >= 4 and current is KeywordCategory.CONTENT:
                name = title_raw.strip().strip("*").rstrip(":").strip()
                name = _SUBCONTENT_PREFIX_RE.sub("", name + ":").rstrip(":").strip() or name
                groups.append((name, []))
                current_group = groups[-1][1]
                continue
            if title == "layout":
                if strict:
                    raise MalformedHeadingError(lineno, line.strip())
                diagnostics.warn(lineno, "Layout block dropped", recovery=True)
                current = None
                current_group = None
                skipping = True
                continue
            category = known.get(title)
            if category is None:
                if strict:
                    raise MalformedHeadingError(lineno, line.strip())
                diagnostics.warn(lineno, f"unknown heading {line.strip()!r} skipped", recovery=True)
                current = None
                current_group = None
                skipping = True
                continue
            if category in categories and category is not KeywordCategory.CONTENT:
                diagnostics.warn(lineno, f"duplicate category {title_raw!r}; appending", recovery=True)
            categories.setdefault(category, [])
            current = category
            current_group = None
            skipping = False
            continue
        bullet = _BULLET_RE.match(line.strip())
        if bullet:
            keyword = _clean_keyword(bullet.group(1))
            if not keyword:
                diagnostics.warn(lineno, "empty bullet ignored", recovery=True)
                continue
            if current is None:
                if not skipping:
                    diagnostics.warn(
                        lineno, f"keyword before any category ignored: {keyword!r}", recovery=True
                    )
                continue
            if current is KeywordCategory.CONTENT:
                if current_group is None:
                    diagnostics.warn(
                        lineno,
                        f"content keyword outside a subcontent group ignored: {keyword!r}",
                        recovery=True,
                    )
                    continue
                current_group.append(keyword)
            else:
                categories[current].append(keyword)
            continue
        if current is not None:
            diagnostics.warn(lineno, f"non-bullet line ignored: {line.strip()!r}", recovery=True)

    for display, category in _CATEGORY_ORDER:
        if category not in categories:
            raise MissingCategoryError(display)
        if category is KeywordCategory.CONTENT:
            if not any(kw for _, kw in groups):
                diagnostics.warn(0, f"category {display!r} is empty")
        elif not categories[category]:
            diagnostics.warn(0, f"category {display!r} is empty")

    return (
        KeywordSet(
            theme=tuple(categories[KeywordCategory.THEME]),
            art_style=tuple(categories[KeywordCategory.ART_STYLE]),
            content=tuple(
                KeywordGroup(subcontent_name=name, keywords=tuple(kws)) for name, kws in groups
            ),
            lighting_atmosphere=tuple(categories[KeywordCategory.LIGHTING_ATMOSPHERE]),
            color_palette=tuple(categories[KeywordCategory.COLOR_PALETTE]),
            shot_angle=tuple(categories[KeywordCategory.SHOT_ANGLE]),
        ),
        diagnostics,
    )


def serialize_keywords(kw: KeywordSet) -> str:
    """Canonical markdown: six categories in order, groups under Content."""
    violations = validate_keywords(kw)
    if violations:
        raise InvalidKeywordsError(violations)
    blocks: list[str] = []
    for display, category in _CATEGORY_ORDER:
        lines = [f"### {display}"]
        if category is KeywordCategory.CONTENT:
            for group in kw.content:
                lines.append(f"#### {group.subcontent_name}")
                lines.extend(f"* {keyword}" for keyword in group.keywords)
        else:
            lines.extend(f"* {keyword}" for keyword in getattr(kw, category.value))
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"
