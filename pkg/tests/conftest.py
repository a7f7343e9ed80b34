"""Shared fixtures: mock provider sets, stores, orchestrators, generators.

The generators build randomized *valid* domain values from a seeded
``random.Random`` so tests that need exact case counts stay deterministic
and fast; hypothesis is used where a property is about arbitrary input.
"""

from __future__ import annotations

import random
from pathlib import Path

import pytest

from ideastudio.model import (
    DesignIdea,
    KeywordGroup,
    KeywordSet,
    Subcontent,
)
from ideastudio.orchestrator import FanOutPolicy, Orchestrator
from ideastudio.providers import (
    MockImageProvider,
    MockSearchProvider,
    MockTextProvider,
    MockVisionProvider,
    ProviderSet,
)
from ideastudio.store import SessionStore

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def anyio_backend():
    return "asyncio"


def load_corpus(name: str) -> str:
    return (DATA_DIR / name).read_text()


IDEA_CORPUS = [
    "idea_photographer_room.md",
    "idea_fairy_village.md",
    "idea_forest_retreat.md",
    "idea_forest_retreat_stone.md",
    "idea_tropical_village.md",
]
KEYWORD_CORPUS = ["keywords_photographer_room.md"]


def mock_providers(seed: int = 0, script=None) -> ProviderSet:
    return ProviderSet(
        text=MockTextProvider(seed=seed, script=script),
        vision=MockVisionProvider(seed=seed),
        image=MockImageProvider(seed=seed),
        search=MockSearchProvider(seed=seed),
    )


@pytest.fixture
def providers() -> ProviderSet:
    return mock_providers(seed=11)


@pytest.fixture
def store(tmp_path) -> SessionStore:
    return SessionStore(tmp_path / "store")


@pytest.fixture
def orchestrator(providers, store) -> Orchestrator:
    return Orchestrator(providers, store)


@pytest.fixture
def small_orchestrator(providers, tmp_path) -> Orchestrator:
    """Narrow fan-out for tests where width is not the point."""
    store = SessionStore(tmp_path / "small-store", fsync=False)
    policy = FanOutPolicy(brainstorm_count=2, refine_count=2)
    return Orchestrator(providers, store, policy=policy)


# -- randomized valid-value generators ---------------------------------------

_WORDS = (
    "amber atrium banner basalt beacon breeze canal cedar cliff copper crane dusk "
    "ember fjord forge garden granite grove harbor hearth lantern ledge lunar marsh "
    "meadow mill mosaic moss night ochre orchard pier plaza quarry reef ridge river "
    "shrine slate spire spring summit terrace thicket tide timber tower veranda willow"
).split()

_NAME_WORDS = (
    "Alcove Annex Arcade Arch Balcony Basin Causeway Cellar Court Dais Dock Gallery "
    "Gate Keep Kiln Loft Nave Parapet Pavilion Quay Rampart Rotunda Stair Vault Well Wing"
).split()


def gen_phrase(rng: random.Random, lo: int = 2, hi: int = 8) -> str:
    return " ".join(rng.choice(_WORDS) for _ in range(rng.randint(lo, hi)))


def gen_sentence(rng: random.Random) -> str:
    text = gen_phrase(rng, 3, 10).capitalize()
    if rng.random() < 0.3:
        text += f", {gen_phrase(rng, 2, 5)}"
    return text + "."


def gen_idea(rng: random.Random) -> DesignIdea:
    names = rng.sample(_NAME_WORDS, rng.randint(1, 7))
    content = tuple(
        Subcontent(
            name=f"{rng.choice(_WORDS).capitalize()} {name}" if rng.random() < 0.5 else name,
            description=gen_sentence(rng),
        )
        for name in names
    )
    return DesignIdea(
        theme=gen_phrase(rng, 2, 7).title(),
        art_style=gen_sentence(rng),
        content=content,
        lighting_atmosphere="\n".join(gen_sentence(rng) for _ in range(rng.randint(1, 2))),
        color_palette=gen_sentence(rng),
        layout=gen_sentence(rng),
        shot_angle=gen_sentence(rng),
    )


def gen_keyword(rng: random.Random, max_words: int = 5) -> str:
    return " ".join(rng.choice(_WORDS).capitalize() for _ in range(rng.randint(1, max_words)))


def gen_keywords(rng: random.Random) -> KeywordSet:
    def bucket(limit: int) -> tuple[str, ...]:
        return tuple(gen_keyword(rng) for _ in range(rng.randint(0, limit)))

    group_names = rng.sample(_NAME_WORDS, rng.randint(0, 5))
    groups = []
    budget = 20
    for name in group_names:
        take = rng.randint(0, min(4, budget))
        budget -= take
        groups.append(
            KeywordGroup(subcontent_name=name, keywords=tuple(gen_keyword(rng) for _ in range(take)))
        )
    return KeywordSet(
        theme=bucket(3),
        art_style=bucket(3),
        content=tuple(groups),
        lighting_atmosphere=bucket(5),
        color_palette=bucket(5),
        shot_angle=bucket(3),
    )


# -- independent lineage oracle ----------------------------------------------


def toposort_oracle(cards: dict) -> list[str]:
    """Kahn's algorithm over (parent -> child) edges, independent of the
    model's own checks. Raises AssertionError on dangling parents or cycles;
    returns one valid topological order."""
    children: dict[str, list[str]] = {card_id: [] for card_id in cards}
    indegree = {card_id: 0 for card_id in cards}
    for card_id, card in cards.items():
        parent = card.lineage.parent_card_id
        if parent is None:
            continue
        assert parent in cards, f"dangling parent {parent} of {card_id}"
        children[parent].append(card_id)
        indegree[card_id] += 1
    frontier = [card_id for card_id, deg in indegree.items() if deg == 0]
    order = []
    while frontier:
        node = frontier.pop()
        order.append(node)
        for child in children[node]:
            indegree[child] -= 1
            if indegree[child] == 0:
                frontier.append(child)
    assert len(order) == len(cards), "cycle detected in lineage graph"
    return order
