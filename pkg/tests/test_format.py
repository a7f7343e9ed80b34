"""Parsing and serialization of the idea and keyword text formats."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import IDEA_CORPUS, KEYWORD_CORPUS, gen_idea, gen_keywords, load_corpus
from ideastudio.format import (
    EmptyContentError,
    IdeaFormatError,
    InvalidIdeaError,
    InvalidKeywordsError,
    MalformedHeadingError,
    MissingCategoryError,
    MissingSectionError,
    parse_idea,
    parse_keywords,
    serialize_idea,
    serialize_keywords,
)
from ideastudio.model import KeywordSet, validate_idea, validate_keywords
from test_model import minimal_idea


class TestParseIdeaCorpus:
    @pytest.mark.parametrize("name", IDEA_CORPUS)
    def test_parses_with_zero_errors(self, name):
        idea, diagnostics = parse_idea(load_corpus(name))
        assert validate_idea(idea) == []
        assert not diagnostics.recovered

    def test_photographer_room_structure(self):
        idea, _ = parse_idea(load_corpus("idea_photographer_room.md"))
        assert idea.theme == "1930s Photographer/Film Camera Room in an Industrial Factory"
        assert len(idea.content) == 7
        assert idea.content[0].name == "Central Workstation"
        assert idea.content[0].description.startswith("A large wooden desk")

    def test_fairy_village_structure(self):
        idea, _ = parse_idea(load_corpus("idea_fairy_village.md"))
        assert len(idea.content) == 6
        assert idea.content[0].name == "Central Focus"

    def test_bold_bullet_content_shape(self):
        idea, _ = parse_idea(load_corpus("idea_forest_retreat.md"))
        assert [s.name for s in idea.content][:2] == ["Central Structures", "Lakeside Area"]

    @pytest.mark.parametrize("name", IDEA_CORPUS)
    def test_corpus_round_trips(self, name):
        idea, _ = parse_idea(load_corpus(name))
        again, _ = parse_idea(serialize_idea(idea))
        assert again == idea


class TestParseIdeaShapes:
    def test_subcontent_label_prefix_stripped(self):
        text = (
            "### Theme\nt\n### Art Style\na\n### Content\n"
            "Subcontent1: Desk Area: a large desk\n"
            "Subcontent2: just a description\n"
            "### Lighting and Atmosphere\nl\n### Color Palette\nc\n### Layout\ny\n### Shot Angle\ns\n"
        )
        idea, _ = parse_idea(text)
        assert idea.content[0].name == "Desk Area"
        assert idea.content[1].name == "Subcontent2"
        assert idea.content[1].description == "just a description"

    def test_heading_aliases_and_case(self):
        text = (
            "### THEME\nt\n### art style\na\n### Content\nA: b\n"
            "### Lighting & Atmosphere\nl\n### Color Pallete\nc\n### Layout\ny\n### shot angle\ns\n"
        )
        idea, _ = parse_idea(text)
        assert idea.lighting_atmosphere == "l"
        assert idea.color_palette == "c"

    def test_crlf_normalized(self):
        text = load_corpus("idea_photographer_room.md").replace("\n", "\r\n")
        idea, _ = parse_idea(text)
        assert len(idea.content) == 7

    def test_missing_section(self):
        with pytest.raises(MissingSectionError) as err:
            parse_idea("### Theme\nt\n")
        assert err.value.section == "Art Style"

    def test_empty_content(self):
        text = (
            "### Theme\nt\n### Art Style\na\n### Content\n"
            "### Lighting and Atmosphere\nl\n### Color Palette\nc\n### Layout\ny\n### Shot Angle\ns\n"
        )
        with pytest.raises(EmptyContentError):
            parse_idea(text)

    def test_unknown_heading_tolerant_vs_strict(self):
        text = (
            "### Theme\nt\n### Art Style\na\n### Content\nA: b\n### Mood Board\nskipped\n"
            "### Lighting and Atmosphere\nl\n### Color Palette\nc\n### Layout\ny\n### Shot Angle\ns\n"
        )
        idea, diagnostics = parse_idea(text)
        assert diagnostics.recovered
        assert "skipped" not in idea.lighting_atmosphere
        with pytest.raises(MalformedHeadingError):
            parse_idea(text, strict=True)

    def test_multiline_sections_preserved(self):
        idea, _ = parse_idea(load_corpus("idea_fairy_village.md"))
        assert "\n" in idea.lighting_atmosphere  # two labeled lines in the source

    def test_wrong_heading_level_recovers_with_warning(self):
        text = load_corpus("idea_photographer_room.md").replace("### Theme", "## Theme", 1)
        idea, diagnostics = parse_idea(text)
        assert idea.theme.startswith("1930s")
        assert diagnostics.recovered


class TestSerializeIdea:
    def test_minimal_has_seven_headings(self):
        text = serialize_idea(minimal_idea())
        assert text.count("### ") == 7
        assert text.index("### Theme") < text.index("### Art Style") < text.index("### Content")

    def test_invalid_idea_rejected(self):
        with pytest.raises(InvalidIdeaError):
            serialize_idea(minimal_idea(theme=""))


class TestParseKeywordsCorpus:
    @pytest.mark.parametrize("name", KEYWORD_CORPUS)
    def test_parses_without_recovery(self, name):
        kw, diagnostics = parse_keywords(load_corpus(name))
        assert not diagnostics.recovered

    def test_photographer_keywords_structure(self):
        kw, _ = parse_keywords(load_corpus("keywords_photographer_room.md"))
        assert kw.theme == ("1930s Photographer", "Industrial Factory")
        assert len(kw.art_style) == 3
        assert kw.shot_angle == ("3/4 View",)
        darkroom = next(g for g in kw.content if g.subcontent_name == "Darkroom corner")
        assert "Red Lighting Darkroom" in darkroom.keywords
        # the trailing-colon heading in the source is normalized
        assert any(g.subcontent_name == "Exterior Cutaway" for g in kw.content)


class TestParseKeywordShapes:
    def make(self, body: str) -> str:
        return (
            "### Theme\n* t\n### Art Style\n* a\n### Content\n#### G\n* k\n"
            + body
            + "### Lighting and Atmosphere\n* l\n### Color Palette\n* c\n### Shot Angle\n* s\n"
        )

    def test_layout_block_dropped_with_warning(self):
        kw, diagnostics = parse_keywords(self.make("### Layout\n* should vanish\n"))
        assert diagnostics.recovered
        assert any("Layout" in w.message for w in diagnostics.warnings)
        assert "should vanish" not in kw.all_keywords()

    def test_missing_category(self):
        with pytest.raises(MissingCategoryError) as err:
            parse_keywords("### Theme\n* t\n")
        assert err.value.category == "Art Style"

    def test_empty_category_is_warning_not_error(self):
        text = (
            "### Theme\n### Art Style\n* a\n### Content\n#### G\n* k\n"
            "### Lighting and Atmosphere\n* l\n### Color Palette\n* c\n### Shot Angle\n* s\n"
        )
        kw, diagnostics = parse_keywords(text)
        assert kw.theme == ()
        assert any("empty" in w.message.lower() for w in diagnostics.warnings)

    def test_dash_bullets_and_bold_markers(self):
        text = (
            "### Theme\n- **Bold Theme**\n### Art Style\n- a\n### Content\n#### G\n- k\n"
            "### Lighting and Atmosphere\n- l\n### Color Palette\n- c\n### Shot Angle\n- s\n"
        )
        kw, _ = parse_keywords(text)
        assert kw.theme == ("Bold Theme",)

    def test_content_bullet_outside_group_skipped(self):
        text = (
            "### Theme\n* t\n### Art Style\n* a\n### Content\n* stray\n#### G\n* k\n"
            "### Lighting and Atmosphere\n* l\n### Color Palette\n* c\n### Shot Angle\n* s\n"
        )
        kw, diagnostics = parse_keywords(text)
        assert diagnostics.recovered
        assert kw.content[0].keywords == ("k",)


class TestSerializeKeywords:
    def test_six_headings_no_layout(self):
        kw = KeywordSet(
            theme=("x",),
            art_style=("x",),
            content=(),
            lighting_atmosphere=("x",),
            color_palette=("x",),
            shot_angle=("x",),
        )
        text = serialize_keywords(kw)
        assert text.count("### ") == 6
        assert "Layout" not in text

    def test_over_limit_rejected(self):
        with pytest.raises(InvalidKeywordsError):
            serialize_keywords(KeywordSet(theme=("a", "b", "c", "d")))


class TestRoundTrip:
    def test_idea_round_trip_randomized(self):
        rng = random.Random(42)
        for _ in range(200):
            idea = gen_idea(rng)
            again, _ = parse_idea(serialize_idea(idea))
            assert again == idea

    def test_keywords_round_trip_randomized(self):
        rng = random.Random(43)
        for _ in range(200):
            kw = gen_keywords(rng)
            again, _ = parse_keywords(serialize_keywords(kw))
            assert again == kw


class TestTotality:
    @settings(max_examples=200, deadline=None)
    @given(st.text(max_size=400))
    def test_parse_idea_never_crashes(self, text):
        try:
            idea, diagnostics = parse_idea(text)
            assert diagnostics is not None
        except IdeaFormatError:
            pass

    @settings(max_examples=200, deadline=None)
    @given(st.text(max_size=400))
    def test_parse_keywords_never_crashes(self, text):
        try:
            kw, diagnostics = parse_keywords(text)
            assert diagnostics is not None
        except IdeaFormatError:
            pass

    @settings(max_examples=100, deadline=None)
    @given(st.text(alphabet="#*- :\nabcTheme", max_size=200))
    def test_heading_like_noise_never_crashes(self, text):
        try:
            parse_idea(text)
        except IdeaFormatError:
            pass
        try:
            parse_keywords(text)
        except IdeaFormatError:
            pass
