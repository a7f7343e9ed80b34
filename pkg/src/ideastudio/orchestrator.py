"""Pipeline execution: fan-out generation with per-idea dual processing.

A brainstorm or explore fan-out launches one generation per scheduled
creative score; each idea that parses becomes a card and immediately fans
into two concurrent tasks, keyword extraction and image generation. Combine
and refine fan the same machinery out from an existing card. Failures are
isolated per slot: a failed generation never aborts its siblings, and a
card whose extraction or image failed is kept with its error recorded.

Generation calls run inside a repair loop: when output does not parse as a
valid idea, the model is re-asked with a note describing the problem, up to
the configured number of retries. The repair note converges far cheaper
than blind resampling.

Cards stream to the store and event bus as they complete rather than
waiting for the full batch; end-to-end generation against live providers
runs tens of seconds, and incremental delivery is the only humane UX at
that latency.
"""

from __future__ import annotations

import asyncio
from dataclasses import dataclass

from pydantic import BaseModel, ConfigDict, Field

from . import prompts
from .events import EventBus
from .format import IdeaFormatError, InvalidIdeaError, parse_idea, parse_keywords, serialize_idea
from .model import (
    CARD_IMAGE_HEIGHT,
    CARD_IMAGE_WIDTH,
    Cycle,
    CycleInput,
    CycleKind,
    DesignIdea,
    IdeaCard,
    ImageRef,
    KeywordSet,
    LineageEdge,
    LineageKind,
    derive_title,
    new_id,
    unmatched_keyword_groups,
    utcnow,
    validate_idea,
)
from .providers.base import ProviderError, ProviderSet, SearchResult
from .store import Reference, SessionStore, SlotState


class FanOutPolicy(BaseModel):
    """How wide each operation fans out and how generation retries."""

    model_config = ConfigDict(frozen=True)

    brainstorm_count: int = Field(default=8, ge=1)
    refine_count: int = Field(default=5, ge=1)
    score_schedule: str = "even"
    parse_retries: int = Field(default=2, ge=0)

    def scores(self, count: int) -> list[float]:
        """Creative scores for one fan-out, spanning conservative to wild.

        The even schedule spaces scores i/(n-1) so both endpoints are
        always included; a fan-out of one gets the midpoint.
        """
        if self.score_schedule != "even":
            raise ValueError(f"unknown score schedule {self.score_schedule!r}")
        if count == 1:
            return [0.5]
        return [i / (count - 1) for i in range(count)]


class StructuredOutputFailure(Exception):
    """Generation kept producing unparseable output; attempts were exhausted."""

    def __init__(self, attempts: int, last_error: Exception):
        self.attempts = attempts
        self.last_error = last_error
        super().__init__(f"no well-formed idea after {attempts} attempts: {last_error}")


class AllIdeasFailed(Exception):
    def __init__(self, cycle_id: str, errors: list[str]):
        self.cycle_id = cycle_id
        self.errors = errors
        super().__init__(f"every generation in cycle {cycle_id} failed")


_REPAIR_NOTE = (
    "Your previous output did not follow the required format. Reply again with exactly "
    "the seven '###' sections in order (Theme, Art Style, Content, Lighting and "
    "Atmosphere, Color Palette, Layout, Shot Angle), where each Content line is "
    "'Name: description'. Problem with the previous output: {error}"
)

_KEYWORD_REPAIR_NOTE = (
    "Your previous output did not follow the required format. Reply again with the six "
    "'###' categories (Theme, Art Style, Content, Lighting and Atmosphere, Color "
    "Palette, Shot Angle), '####' subcontent headings inside Content, and one '*' "
    "bullet per keyword. Omit Layout. Problem with the previous output: {error}"
)


@dataclass(frozen=True)
class StructuredIdea:
    idea: DesignIdea
    attempts: int
    raw_text: str


class ReferenceInput(BaseModel):
    """A combine reference: a search result or an uploaded image blob."""

    model_config = ConfigDict(frozen=True)

    search_result: SearchResult | None = None
    blob_id: str | None = None

    def validated(self) -> "ReferenceInput":
        if (self.search_result is None) == (self.blob_id is None):
            raise ValueError("a reference is either a search result or an uploaded image")
        return self


class Orchestrator:
    def __init__(
        self,
        providers: ProviderSet,
        store: SessionStore,
        policy: FanOutPolicy | None = None,
        bus: EventBus | None = None,
        template_dir=None,
    ):
        self.providers = providers
        self.store = store
        self.policy = policy or FanOutPolicy()
        self.bus = bus or EventBus()
        self.template_dir = template_dir
        self._background: set[asyncio.Task] = set()

    # -- structured generation ------------------------------------------------

    async def generate_structured_idea(self, bundle: prompts.PromptBundle) -> StructuredIdea:
        """Generate until the output parses into a valid idea.

        Each retry appends a repair note naming the problem to the user
        message; provider errors propagate immediately.
        """
        current = bundle
        last_error: Exception | None = None
        attempts = 0
        for attempts in range(1, self.policy.parse_retries + 2):
            text = await self.providers.text.generate_text(current)
            try:
                idea, _ = parse_idea(text)
                violations = validate_idea(idea)
                if violations:
                    raise InvalidIdeaError(violations)
                return StructuredIdea(idea=idea, attempts=attempts, raw_text=text)
            except IdeaFormatError as err:
                last_error = err
                current = current.model_copy(
                    update={
                        "user_text": bundle.user_text
                        + "\n\n"
                        + _REPAIR_NOTE.format(error=err)
                    }
                )
        raise StructuredOutputFailure(attempts, last_error or ValueError("unparseable"))

    async def _generate_structured_keywords(
        self, idea: DesignIdea
    ) -> tuple[KeywordSet, tuple[str, ...]]:
        bundle = prompts.build_keyword_extraction(idea, template_dir=self.template_dir)
        current = bundle
        last_error: Exception | None = None
        for _ in range(self.policy.parse_retries + 1):
            text = await self.providers.text.generate_text(current)
            try:
                keywords, _ = parse_keywords(text)
                return keywords, tuple(unmatched_keyword_groups(keywords, idea))
            except IdeaFormatError as err:
                last_error = err
                current = current.model_copy(
                    update={
                        "user_text": bundle.user_text
                        + "\n\n"
                        + _KEYWORD_REPAIR_NOTE.format(error=err)
                    }
                )
        raise StructuredOutputFailure(self.policy.parse_retries + 1, last_error or ValueError())

    # -- fan-out machinery ------------------------------------------------------

    def _track(self, coro) -> asyncio.Task:
        task = asyncio.get_running_loop().create_task(coro)
        self._background.add(task)
        task.add_done_callback(self._background.discard)
        return task

    async def drain(self) -> None:
        """Wait until all background enrichment work has settled."""
        while self._background:
            await asyncio.gather(*list(self._background), return_exceptions=True)

    def cancel_background(self) -> None:
        for task in list(self._background):
            task.cancel()

    async def _enrich_card(self, session_id: str, cycle_id: str, card: IdeaCard) -> None:
        """Run keyword extraction and image generation for one card, in
        parallel; a failure in either marks the card but keeps it. Events
        carry the cycle id so cycle-stream subscribers see every
        transition."""

        def emit(type_: str, updated: IdeaCard) -> None:
            self.bus.publish(
                type_,
                session_id,
                cycle_id=cycle_id,
                card_id=card.id,
                payload=_card_payload(updated),
            )

        async def keywords() -> None:
            try:
                keyword_set, warnings = await self._generate_structured_keywords(card.idea)
                emit("card-keywords", self.store.set_card_keywords(card.id, keyword_set, warnings))
            except (ProviderError, StructuredOutputFailure) as err:
                emit("card-failed", self.store.set_card_failure(card.id, f"keyword extraction: {err}"))

        async def image() -> None:
            try:
                generated = await self.providers.image.generate_image(
                    serialize_idea(card.idea), CARD_IMAGE_WIDTH, CARD_IMAGE_HEIGHT
                )
                blob_id = self.store.save_blob(generated.data)
                emit(
                    "card-image",
                    self.store.set_card_image(
                        card.id,
                        ImageRef(blob_id=blob_id, width=generated.width, height=generated.height),
                    ),
                )
            except ProviderError as err:
                emit("card-failed", self.store.set_card_failure(card.id, f"image generation: {err}"))

        await asyncio.gather(keywords(), image())
        final = self.store.get_card(card.id)
        if final.failure is None:
            emit("card-ready", final)

    async def _run_slot(
        self,
        session_id: str,
        cycle_id: str,
        slot: int,
        score: float,
        bundle: prompts.PromptBundle,
        lineage: LineageEdge,
    ) -> IdeaCard | None:
        """One fan-out slot: generate, persist the card, then spawn its
        enrichment into the background. Returns None if generation failed."""
        try:
            structured = await self.generate_structured_idea(bundle)
        except (ProviderError, StructuredOutputFailure) as err:
            self.store.fail_slot(session_id, cycle_id, slot, str(err))
            self.bus.publish(
                "slot-failed",
                session_id,
                cycle_id=cycle_id,
                payload={"slot": slot, "error": str(err)},
            )
            return None
        card = IdeaCard(
            id=new_id("card-"),
            title=derive_title(structured.idea.theme),
            idea=structured.idea,
            lineage=lineage,
            created_at=utcnow(),
        )
        self.store.append_card(session_id, cycle_id, card, slot=slot)
        self.bus.publish(
            "card-created",
            session_id,
            cycle_id=cycle_id,
            card_id=card.id,
            payload={**_card_payload(card), "slot": slot},
        )
        self._track(self._enrich_card(session_id, cycle_id, card))
        return card

    async def _fan_out(
        self,
        session_id: str,
        cycle_id: str,
        count: int,
        make_bundle,
        make_lineage,
    ) -> list[IdeaCard]:
        """Launch ``count`` concurrent slots; returns the cards whose ideas
        parsed. Raises AllIdeasFailed when none did."""
        scores = self.policy.scores(count)
        slots = [self.store.add_slot(session_id, cycle_id, score) for score in scores]
        results = await asyncio.gather(
            *(
                self._run_slot(
                    session_id,
                    cycle_id,
                    slot,
                    score,
                    make_bundle(score),
                    make_lineage(score),
                )
                for slot, score in zip(slots, scores)
            )
        )
        cards = [card for card in results if card is not None]
        if not cards:
            _, slot_states = self.store.get_cycle(session_id, cycle_id)
            errors = [s.error for s in slot_states if s.error]
            self.bus.publish("cycle-complete", session_id, cycle_id=cycle_id, payload={"cards": 0})
            raise AllIdeasFailed(cycle_id, errors)
        self._track(self._finish_cycle(session_id, cycle_id))
        return cards

    async def _finish_cycle(self, session_id: str, cycle_id: str) -> None:
        # Runs after the slots have resolved; waits for enrichment tasks
        # belonging to this cycle by polling the store's card states.
        while True:
            cycle, slots = self.store.get_cycle(session_id, cycle_id)
            pending = False
            for slot in slots:
                if slot.card_id is None and slot.error is None:
                    pending = True
                    break
                if slot.card_id is not None:
                    card = self.store.get_card(slot.card_id)
                    if card.failure is None and (card.keywords is None or card.image is None):
                        pending = True
                        break
            if not pending:
                break
            await asyncio.sleep(0.01)
        self.bus.publish(
            "cycle-complete",
            session_id,
            cycle_id=cycle_id,
            payload={"cards": len(cycle.card_ids)},
        )

    # -- pipeline operations ---------------------------------------------------

    async def start_brainstorm_cycle(
        self,
        session_id: str,
        instruction: str | None = None,
        image_blob_id: str | None = None,
    ) -> Cycle:
        """Validate inputs and persist an empty brainstorm cycle, so callers
        can hand out the cycle id before the fan-out runs."""
        instruction = (instruction or "").strip() or None
        if instruction is None and image_blob_id is None:
            raise prompts.EmptyInputError("brainstorm needs an instruction or an image")
        if image_blob_id is not None:
            self.store.open_blob(image_blob_id)  # fail fast on a bad reference
        cycle = self.store.create_cycle(
            session_id,
            CycleKind.BRAINSTORM,
            CycleInput(instruction=instruction, source_image=image_blob_id),
        )
        self.bus.publish(
            "cycle-created", session_id, cycle_id=cycle.id, payload={"kind": cycle.kind.value}
        )
        return cycle

    async def run_brainstorm_fanout(self, session_id: str, cycle_id: str) -> list[IdeaCard]:
        """The brainstorm fan-out; an input image is captioned exactly once."""
        cycle, _ = self.store.get_cycle(session_id, cycle_id)
        caption: str | None = None
        if cycle.input.source_image is not None:
            caption = await self.providers.vision.caption_image(
                self.store.open_blob(cycle.input.source_image)
            )
        instruction = cycle.input.instruction
        return await self._fan_out(
            session_id,
            cycle.id,
            self.policy.brainstorm_count,
            make_bundle=lambda score: prompts.build_idea_generation(
                instruction, caption, score, template_dir=self.template_dir
            ),
            make_lineage=lambda score: LineageEdge(
                origin_kind=LineageKind.BRAINSTORM_ROOT, creative_score=score
            ),
        )

    async def brainstorm(
        self,
        session_id: str,
        instruction: str | None = None,
        image_blob_id: str | None = None,
    ) -> Cycle:
        """One complete brainstorm: start the cycle and run the fan-out."""
        cycle = await self.start_brainstorm_cycle(session_id, instruction, image_blob_id)
        await self.run_brainstorm_fanout(session_id, cycle.id)
        refreshed, _ = self.store.get_cycle(session_id, cycle.id)
        return refreshed

    async def combine_with_reference(
        self, card_id: str, keyword: str, reference: ReferenceInput
    ) -> list[IdeaCard]:
        """Blend a captioned reference into the section a keyword locates."""
        if not keyword.strip():
            raise prompts.EmptyFieldError("keyword")
        reference = reference.validated()
        session_id = self.store.session_id_of_card(card_id)
        card = self.store.get_card(card_id)
        cycle = self.store.find_cycle_of_card(card_id)

        if reference.blob_id is not None:
            caption = await self.providers.vision.caption_image(
                self.store.open_blob(reference.blob_id)
            )
            stored = self.store.save_reference(
                session_id,
                Reference(id=new_id("ref-"), title="uploaded reference", blob_id=reference.blob_id),
            )
        else:
            result = reference.search_result
            caption = await self.providers.vision.caption_image(result.image_url)
            stored = self.store.save_reference(
                session_id,
                Reference(
                    id=new_id("ref-"),
                    title=result.title,
                    image_url=result.image_url,
                    thumbnail_url=result.thumbnail_url,
                    source_page_url=result.source_page_url,
                ),
            )

        return await self._fan_out(
            session_id,
            cycle.id,
            self.policy.refine_count,
            make_bundle=lambda score: prompts.build_combine(
                card.idea, keyword, caption, score, template_dir=self.template_dir
            ),
            make_lineage=lambda score: LineageEdge(
                origin_kind=LineageKind.COMBINED_WITH_REFERENCE,
                parent_card_id=card.id,
                keyword=keyword.strip(),
                reference_image_id=stored.id,
                creative_score=score,
            ),
        )

    async def refine_by_instruction(self, card_id: str, instruction: str) -> list[IdeaCard]:
        if not instruction.strip():
            raise prompts.EmptyFieldError("instruction")
        session_id = self.store.session_id_of_card(card_id)
        card = self.store.get_card(card_id)
        cycle = self.store.find_cycle_of_card(card_id)
        return await self._fan_out(
            session_id,
            cycle.id,
            self.policy.refine_count,
            make_bundle=lambda score: prompts.build_refine(
                card.idea, instruction, score, template_dir=self.template_dir
            ),
            make_lineage=lambda score: LineageEdge(
                origin_kind=LineageKind.REFINED_BY_INSTRUCTION,
                parent_card_id=card.id,
                instruction=instruction.strip(),
                creative_score=score,
            ),
        )

    async def start_explore_cycle(self, card_id: str, instruction: str | None = None) -> Cycle:
        """Persist an empty explore-more cycle seeded by an existing card."""
        session_id = self.store.session_id_of_card(card_id)
        card = self.store.get_card(card_id)
        violations = validate_idea(card.idea)
        if violations:
            raise InvalidIdeaError(violations)
        instruction = (instruction or "").strip() or None
        cycle = self.store.create_cycle(
            session_id,
            CycleKind.EXPLORE_MORE,
            CycleInput(instruction=instruction, source_card_id=card.id),
        )
        self.bus.publish(
            "cycle-created", session_id, cycle_id=cycle.id, payload={"kind": cycle.kind.value}
        )
        return cycle

    async def run_explore_fanout(self, session_id: str, cycle_id: str) -> list[IdeaCard]:
        """Same fan-out as brainstorming, with the source card's full
        description standing in for an image caption."""
        cycle, _ = self.store.get_cycle(session_id, cycle_id)
        card = self.store.get_card(cycle.input.source_card_id)
        instruction = cycle.input.instruction
        return await self._fan_out(
            session_id,
            cycle.id,
            self.policy.brainstorm_count,
            make_bundle=lambda score: prompts.build_explore(
                card.idea, instruction, score, template_dir=self.template_dir
            ),
            make_lineage=lambda score: LineageEdge(
                origin_kind=LineageKind.EXPLORED_FROM,
                parent_card_id=card.id,
                instruction=instruction,
                creative_score=score,
            ),
        )

    async def explore_more(self, card_id: str, instruction: str | None = None) -> Cycle:
        """Start the next cycle from an existing card and run its fan-out."""
        cycle = await self.start_explore_cycle(card_id, instruction)
        await self.run_explore_fanout(cycle.session_id, cycle.id)
        refreshed, _ = self.store.get_cycle(cycle.session_id, cycle.id)
        return refreshed

    async def search_for_keyword(
        self, session_id: str, keyword: str, page: int = 0
    ) -> list[SearchResult]:
        if not keyword.strip():
            raise prompts.EmptyFieldError("keyword")
        results = await self.providers.search.search_images(keyword, page)
        self.store.record_search(session_id, keyword, page)
        return results


def _card_payload(card: IdeaCard) -> dict:
    """Compact state summary carried by events."""
    return {
        "card_id": card.id,
        "title": card.title,
        "has_keywords": card.keywords is not None,
        "has_image": card.image is not None,
        "image_blob_id": card.image.blob_id if card.image else None,
        "failure": card.failure,
        "state": card_state(card),
    }


def card_state(card: IdeaCard) -> str:
    if card.failure is not None:
        return "failed"
    if card.keywords is not None and card.image is not None:
        return "ready"
    return "generating"


def cycle_is_complete(slots: list[SlotState], cards: dict[str, IdeaCard]) -> bool:
    if not slots:
        return False  # fan-out not started yet
    for slot in slots:
        if slot.error is not None:
            continue
        if slot.card_id is None:
            return False
        card = cards.get(slot.card_id)
        if card is None:
            return False
        if card.failure is None and (card.keywords is None or card.image is None):
            return False
    return True
