"""Prompt bundles for the four model roles.

Each role has a versioned system prompt shipped as a text asset under
``templates/``; builders compose the matching user message from pipeline
state. System text is used byte-for-byte as stored — tests pin the
template digests — and a config key may point at an override directory
for prompt experimentation.
"""

from __future__ import annotations

import hashlib
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path

from pydantic import BaseModel, ConfigDict

from ..format import InvalidIdeaError, serialize_idea
from ..model import DesignIdea, validate_idea


class PromptRole(str, Enum):
    IDEA_GENERATION = "idea_generation"
    KEYWORD_EXTRACTION = "keyword_extraction"
    COMBINE_REFERENCE = "combine_reference"
    REFINE_INSTRUCTION = "refine_instruction"


# Generation roles want diversity; extraction should be stable.
TEMPERATURE_HINTS: dict[PromptRole, float] = {
    PromptRole.IDEA_GENERATION: 1.0,
    PromptRole.KEYWORD_EXTRACTION: 0.2,
    PromptRole.COMBINE_REFERENCE: 1.0,
    PromptRole.REFINE_INSTRUCTION: 1.0,
}


class EmptyInputError(ValueError):
    """Neither of the inputs that could seed a generation was given."""


class EmptyFieldError(ValueError):
    def __init__(self, field: str):
        self.field = field
        super().__init__(f"{field} must be nonempty")


class PromptBundle(BaseModel):
    model_config = ConfigDict(frozen=True)

    role: PromptRole
    system_text: str
    user_text: str
    temperature_hint: float


@lru_cache(maxsize=None)
def _packaged_template(role: PromptRole) -> str:
    ref = resources.files(__package__) / "templates" / f"{role.value}.txt"
    return ref.read_text(encoding="utf-8")


def load_template(role: PromptRole, template_dir: Path | None = None) -> str:
    if template_dir is not None:
        override = Path(template_dir) / f"{role.value}.txt"
        if override.exists():
            return override.read_text(encoding="utf-8")
    return _packaged_template(role)


def template_digest(role: PromptRole, template_dir: Path | None = None) -> str:
    return hashlib.sha256(load_template(role, template_dir).encode("utf-8")).hexdigest()


def format_score(score: float) -> str:
    """Canonical score rendering: up to two decimals, trailing zeros trimmed."""
    text = f"{score:.2f}".rstrip("0").rstrip(".")
    return text or "0"


def _require_valid(idea: DesignIdea) -> None:
    violations = validate_idea(idea)
    if violations:
        raise InvalidIdeaError(violations)


def _bundle(role: PromptRole, user_text: str, template_dir: Path | None) -> PromptBundle:
    return PromptBundle(
        role=role,
        system_text=load_template(role, template_dir),
        user_text=user_text,
        temperature_hint=TEMPERATURE_HINTS[role],
    )


def build_idea_generation(
    instruction: str | None,
    image_caption: str | None,
    score: float,
    template_dir: Path | None = None,
) -> PromptBundle:
    """Generation input: score, then instructions (literal "None" when
    absent), then the image description, omitted entirely when there is no
    image."""
    instruction = (instruction or "").strip() or None
    image_caption = (image_caption or "").strip() or None
    if instruction is None and image_caption is None:
        raise EmptyInputError("an instruction or an image caption is required")
    parts = [f"Creative Score: {format_score(score)}", "Instructions:", instruction or "None"]
    if image_caption is not None:
        parts += ["Image Description:", image_caption]
    return _bundle(PromptRole.IDEA_GENERATION, "\n".join(parts), template_dir)


def build_keyword_extraction(idea: DesignIdea, template_dir: Path | None = None) -> PromptBundle:
    _require_valid(idea)
    user_text = "Design Idea:\n" + serialize_idea(idea)
    return _bundle(PromptRole.KEYWORD_EXTRACTION, user_text, template_dir)


def build_combine(
    idea: DesignIdea,
    keyword: str,
    reference_caption: str,
    score: float,
    template_dir: Path | None = None,
) -> PromptBundle:
    """Combine input. This role's template calls the score a variety score,
    so that is the label it gets."""
    if not keyword.strip():
        raise EmptyFieldError("keyword")
    if not reference_caption.strip():
        raise EmptyFieldError("reference_caption")
    _require_valid(idea)
    user_text = (
        f"Variety Score: {format_score(score)}\n"
        "Original Design idea:\n"
        f"{serialize_idea(idea)}"
        "Keyword:\n"
        f"{keyword.strip()}\n"
        "Description of the reference image:\n"
        f"{reference_caption.strip()}"
    )
    return _bundle(PromptRole.COMBINE_REFERENCE, user_text, template_dir)


def build_refine(
    idea: DesignIdea,
    instruction: str,
    score: float,
    template_dir: Path | None = None,
) -> PromptBundle:
    if not instruction.strip():
        raise EmptyFieldError("instruction")
    _require_valid(idea)
    user_text = (
        f"Creative Score: {format_score(score)}\n"
        "Instructions:\n"
        f"{instruction.strip()}\n"
        "Original Design Idea:\n"
        f"{serialize_idea(idea)}"
    )
    return _bundle(PromptRole.REFINE_INSTRUCTION, user_text, template_dir)


def build_explore(
    source_idea: DesignIdea,
    instruction: str | None,
    score: float,
    template_dir: Path | None = None,
) -> PromptBundle:
    """Next-cycle input: a generation bundle whose image description slot
    carries the source idea's full serialized description instead of a
    caption."""
    _require_valid(source_idea)
    return build_idea_generation(
        instruction, serialize_idea(source_idea), score, template_dir=template_dir
    )
