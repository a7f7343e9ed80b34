"""Domain type invariants and validators."""

from __future__ import annotations

import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st
from pydantic import ValidationError

from conftest import gen_idea, gen_keywords
from ideastudio.model import (
    CARD_IMAGE_HEIGHT,
    CARD_IMAGE_WIDTH,
    Cycle,
    CycleInput,
    CycleKind,
    DesignIdea,
    IdeaCard,
    ImageRef,
    KeywordGroup,
    KeywordSet,
    LineageEdge,
    LineageKind,
    Subcontent,
    derive_title,
    make_creative_score,
    new_id,
    normalize_name,
    unmatched_keyword_groups,
    utcnow,
    validate_idea,
    validate_keywords,
)


def minimal_idea(**overrides) -> DesignIdea:
    fields = dict(
        theme="x",
        art_style="x",
        content=(Subcontent(name="A", description="b"),),
        lighting_atmosphere="x",
        color_palette="x",
        layout="x",
        shot_angle="x",
    )
    fields.update(overrides)
    return DesignIdea(**fields)


class TestCreativeScore:
    def test_midpoint_passes_through(self):
        assert make_creative_score(0.5) == 0.5

    def test_clamps_floor(self):
        assert make_creative_score(-0.2) == 0.0

    def test_clamps_ceiling(self):
        assert make_creative_score(1.7) == 1.0

    @pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
    def test_rejects_non_finite(self, bad):
        with pytest.raises(ValueError):
            make_creative_score(bad)

    @given(st.floats(allow_nan=False, allow_infinity=False))
    def test_always_lands_in_unit_interval(self, raw):
        assert 0.0 <= make_creative_score(raw) <= 1.0


class TestValidateIdea:
    def test_valid_minimal(self):
        assert validate_idea(minimal_idea()) == []

    def test_empty_shot_angle(self):
        violations = validate_idea(minimal_idea(shot_angle="  "))
        assert [v.field for v in violations] == ["shot_angle"]

    def test_duplicate_subcontent_names(self):
        idea = minimal_idea(
            content=(
                Subcontent(name="Furniture", description="a"),
                Subcontent(name=" furniture ", description="b"),
            )
        )
        violations = validate_idea(idea)
        assert len(violations) == 1
        assert "duplicate" in violations[0].message

    def test_no_subcontents(self):
        violations = validate_idea(minimal_idea(content=()))
        assert violations[0].field == "content"

    def test_violations_in_section_order(self):
        idea = minimal_idea(theme="", layout="", shot_angle="")
        assert [v.field for v in violations_fields(idea)] == ["theme", "layout", "shot_angle"]

    def test_pure(self):
        idea = minimal_idea(theme="")
        assert validate_idea(idea) == validate_idea(idea)


def violations_fields(idea):
    return validate_idea(idea)


class TestValidateKeywords:
    def test_empty_set_is_valid(self):
        assert validate_keywords(KeywordSet()) == []

    def test_theme_over_limit(self):
        kw = KeywordSet(theme=("a", "b", "c", "d"))
        violations = validate_keywords(kw)
        assert violations and violations[0].field == "theme"

    def test_keyword_word_limit(self):
        kw = KeywordSet(theme=("a very long keyword of seven words total",))
        violations = validate_keywords(kw)
        assert violations and "words" in violations[0].message

    def test_content_total_limit(self):
        groups = tuple(
            KeywordGroup(subcontent_name=f"g{i}", keywords=tuple(f"k{i}{j}" for j in range(5)))
            for i in range(5)
        )
        violations = validate_keywords(KeywordSet(content=groups))
        assert any(v.field == "content" for v in violations)

    def test_randomized_classification(self):
        # The validator agrees with a brute-force reimplementation of the
        # category limits on randomized sets, valid and broken alike.
        rng = random.Random(7)
        for _ in range(300):
            kw = gen_keywords(rng)
            if rng.random() < 0.5:
                kw = kw.model_copy(update={"theme": tuple("k" for _ in range(rng.randint(4, 8)))})
            limits_ok = (
                len(kw.theme) <= 3
                and len(kw.art_style) <= 3
                and sum(len(g.keywords) for g in kw.content) <= 20
                and len(kw.lighting_atmosphere) <= 5
                and len(kw.color_palette) <= 5
                and len(kw.shot_angle) <= 3
                and all(1 <= len(k.split()) <= 5 for k in kw.all_keywords())
            )
            assert (validate_keywords(kw) == []) == limits_ok


class TestUnmatchedGroups:
    def test_matching_is_normalized(self):
        idea = minimal_idea(content=(Subcontent(name="Central  Focus", description="d"),))
        kw = KeywordSet(content=(KeywordGroup(subcontent_name="central focus", keywords=("k",)),))
        assert unmatched_keyword_groups(kw, idea) == []

    def test_unmatched_flagged_not_dropped(self):
        idea = minimal_idea()
        kw = KeywordSet(content=(KeywordGroup(subcontent_name="Ghost", keywords=("k",)),))
        assert unmatched_keyword_groups(kw, idea) == ["Ghost"]
        assert kw.content  # the data stays


class TestLineageEdge:
    def test_brainstorm_root_has_no_parent(self):
        LineageEdge(origin_kind=LineageKind.BRAINSTORM_ROOT, creative_score=0.5)
        with pytest.raises(ValidationError):
            LineageEdge(
                origin_kind=LineageKind.BRAINSTORM_ROOT, parent_card_id="c1", creative_score=0.5
            )

    def test_combine_needs_keyword_and_reference(self):
        LineageEdge(
            origin_kind=LineageKind.COMBINED_WITH_REFERENCE,
            parent_card_id="c1",
            keyword="sofa",
            reference_image_id="r1",
            creative_score=0.5,
        )
        with pytest.raises(ValidationError):
            LineageEdge(
                origin_kind=LineageKind.COMBINED_WITH_REFERENCE,
                parent_card_id="c1",
                keyword="sofa",
                creative_score=0.5,
            )

    def test_refine_needs_nonempty_instruction(self):
        with pytest.raises(ValidationError):
            LineageEdge(
                origin_kind=LineageKind.REFINED_BY_INSTRUCTION,
                parent_card_id="c1",
                instruction="  ",
                creative_score=0.5,
            )

    def test_explore_allows_missing_instruction(self):
        edge = LineageEdge(
            origin_kind=LineageKind.EXPLORED_FROM, parent_card_id="c1", creative_score=1.0
        )
        assert edge.instruction is None

    def test_root_carries_no_keyword(self):
        with pytest.raises(ValidationError):
            LineageEdge(
                origin_kind=LineageKind.BRAINSTORM_ROOT, keyword="sofa", creative_score=0.5
            )


class TestIdeaCard:
    def test_image_dimensions_enforced(self):
        card = dict(
            id=new_id("card-"),
            title="t",
            idea=minimal_idea(),
            lineage=LineageEdge(origin_kind=LineageKind.BRAINSTORM_ROOT, creative_score=0.0),
            created_at=utcnow(),
        )
        IdeaCard(**card, image=ImageRef(blob_id="b", width=CARD_IMAGE_WIDTH, height=CARD_IMAGE_HEIGHT))
        with pytest.raises(ValidationError):
            IdeaCard(**card, image=ImageRef(blob_id="b", width=640, height=480))


class TestCycle:
    def test_explore_requires_source_card(self):
        with pytest.raises(ValidationError):
            Cycle(
                id="c",
                session_id="s",
                kind=CycleKind.EXPLORE_MORE,
                input=CycleInput(instruction="x"),
            )

    def test_brainstorm_forbids_source_card(self):
        with pytest.raises(ValidationError):
            Cycle(
                id="c",
                session_id="s",
                kind=CycleKind.BRAINSTORM,
                input=CycleInput(source_card_id="k"),
            )

    def test_input_needs_something(self):
        with pytest.raises(ValidationError):
            CycleInput()


class TestIds:
    def test_ids_are_time_ordered(self):
        ids = [new_id("card-") for _ in range(500)]
        assert ids == sorted(ids)
        assert len(set(ids)) == len(ids)


class TestTitles:
    def test_short_theme_is_title(self):
        assert derive_title("Sunken Archive") == "Sunken Archive"

    def test_truncates_at_word_boundary(self):
        theme = "word " * 30
        title = derive_title(theme)
        assert len(title) <= 80
        assert not title.endswith(" ")
        assert title in " ".join(theme.split())

    def test_normalizes_whitespace(self):
        assert derive_title("  a\n b ") == "a b"


def test_normalize_name_collapses_case_and_space():
    assert normalize_name(" Central   Focus ") == normalize_name("central focus")


class TestLineageViolations:
    def build_session(self, cards):
        from ideastudio.model import Session

        return Session(id="s", name="s", created_at=utcnow(), cards={c.id: c for c in cards})

    def card(self, card_id: str, parent: str | None):
        kind = LineageKind.BRAINSTORM_ROOT if parent is None else LineageKind.EXPLORED_FROM
        return IdeaCard(
            id=card_id,
            title="t",
            idea=minimal_idea(),
            lineage=LineageEdge(origin_kind=kind, parent_card_id=parent, creative_score=0.5),
            created_at=utcnow(),
        )

    def test_clean_chain_passes(self):
        from ideastudio.model import lineage_violations

        session = self.build_session([self.card("card-a", None), self.card("card-b", "card-a")])
        assert lineage_violations(session) == []

    def test_dangling_parent_reported(self):
        from ideastudio.model import lineage_violations

        session = self.build_session([self.card("card-b", "card-gone")])
        assert any("dangling" in problem for problem in lineage_violations(session))

    def test_parent_must_precede_child(self):
        from ideastudio.model import lineage_violations

        session = self.build_session([self.card("card-z", None), self.card("card-a", "card-z")])
        assert any("strictly follow" in problem for problem in lineage_violations(session))


def test_generated_ideas_are_valid():
    rng = random.Random(1)
    for _ in range(50):
        assert validate_idea(gen_idea(rng)) == []


def test_generated_keyword_sets_are_valid():
    rng = random.Random(2)
    for _ in range(50):
        assert validate_keywords(gen_keywords(rng)) == []
