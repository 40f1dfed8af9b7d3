"""Shared fixtures: example reviews with a matching taxonomy/lexicon, and a
planted synthetic world with disjoint per-topic vocabulary for end-to-end
tests."""

from __future__ import annotations

import random

import pytest

from reviewlens.datagen import Providers
from reviewlens.embedding import EmbeddingCache, builtin_deterministic_provider
from reviewlens.matching import MatchConfig
from reviewlens.model import GranularTopic, Polarity, Review, Taxonomy, topic_slug
from reviewlens.segmentation import SegmenterConfig
from reviewlens.sentiment import LexiconClassifier, SentimentConfig

POS = Polarity.POSITIVE
NEG = Polarity.NEGATIVE


def make_topic(name, polarity, hinge, coarse, keywords, **kwargs):
    return GranularTopic(
        id=kwargs.pop("id", topic_slug(name, polarity)),
        name=name,
        hinge=hinge,
        coarse=coarse,
        polarity=polarity,
        keywords=tuple(keywords),
        **kwargs,
    )


@pytest.fixture(scope="session")
def provider():
    return builtin_deterministic_provider(dim=256, seed=0)


@pytest.fixture()
def cache():
    return EmbeddingCache()


@pytest.fixture(scope="session")
def sample_taxonomy():
    """Hand-built around the two example reviews so that every segment of
    the second review matches its documented topic under the built-in
    embedder (cosines verified while designing the fixture)."""
    return Taxonomy(
        topics=(
            make_topic("color", POS, "appearance", "design and make",
                       ["color is great", "nice color"]),
            make_topic("correct size", POS, "size", "design and make",
                       ["length is great", "size as expected", "true to size"]),
            make_topic("warmth", POS, "comfort", "specifications and functionality",
                       ["warmth is there", "very warm"]),
            make_topic("size smaller than expected", NEG, "size", "design and make",
                       ["have to battle the sleeve tightness", "too short",
                        "xxl fits like an l"]),
            make_topic("arm fit", NEG, "fit", "design and make",
                       ["just very tight in the arm area", "tight in arms"]),
            make_topic("false advertising", NEG, "advertising related", "miscellaneous",
                       ["not the same as the image", "looks different from the picture"]),
        ),
        version=1,
    )


@pytest.fixture(scope="session")
def sample_lexicon():
    return LexiconClassifier(
        {"great": 1.5, "battle": -1.5, "warmth": 1.5, "tight": -1.5, "close": 1.5}
    )


@pytest.fixture()
def sample_providers(provider, sample_lexicon):
    return Providers(embedder=provider, sentiment=sample_lexicon, cache=EmbeddingCache())


@pytest.fixture(scope="session")
def review_image():
    return Review(id="r-image", text="Not even close. not even close to the same as the image.")


@pytest.fixture(scope="session")
def review_jacket():
    return Review(
        id="r-jacket",
        text="Color is GREAT! Have to battle the sleeve tightness. Length is great. "
        "Warmth is there. Just very tight in the arm area. Not shoulders but sleeves",
    )


JACKET_SEGMENTS = [
    "Color is GREAT",
    "Have to battle the sleeve tightness",
    "Length is great",
    "Warmth is there",
    "Just very tight in the arm area",
    "Not shoulders",
    "sleeves",
]

JACKET_INSIGHTS = [
    ("color", "positive", ["Color is GREAT"]),
    ("size smaller than expected", "negative", ["Have to battle the sleeve tightness"]),
    ("correct size", "positive", ["Length is great"]),
    ("warmth", "positive", ["Warmth is there"]),
    ("arm fit", "negative", ["Just very tight in the arm area"]),
]

DEFAULT_CFGS = (SegmenterConfig(), SentimentConfig(), MatchConfig())


def _word(rng: random.Random, length: int = 8) -> str:
    return "".join(rng.choice("abcdefghijklmnopqrstuvwxyz") for _ in range(length))


class PlantedWorld:
    """Synthetic corpus whose topics have disjoint vocabulary, so the
    heuristic pipeline recovers the planted labels deterministically."""

    def __init__(self, n_topics: int = 12, n_reviews: int = 500, seed: int = 7):
        rng = random.Random(seed)
        assert n_topics % 2 == 0
        topics = []
        self.phrases: dict[str, tuple[str, Polarity]] = {}
        for i in range(n_topics):
            polarity = POS if i % 2 == 0 else NEG
            mood = "great" if polarity is POS else "terrible"
            stem = _word(rng)
            name = f"{stem} {_word(rng, 6)}"
            keywords = tuple(
                f"{stem} {_word(rng)} is {mood}" for _ in range(3)
            )
            topics.append(
                make_topic(name, polarity, hinge=f"hinge {stem}", coarse="planted", keywords=keywords)
            )
            for kw in keywords:
                self.phrases[kw] = (name, polarity)
        self.taxonomy = Taxonomy(topics=tuple(topics), version=1)
        self.lexicon = LexiconClassifier({"great": 2.0, "terrible": -2.0})

        phrase_list = sorted(self.phrases)
        self.reviews: list[Review] = []
        self.expected: dict[str, set[tuple[str, str]]] = {}
        for r in range(n_reviews):
            picks = rng.sample(phrase_list, rng.randint(1, 4))
            review = Review(id=f"synth-{r:04d}", text=". ".join(picks) + ".")
            self.reviews.append(review)
            self.expected[review.id] = {
                (self.phrases[p][0], self.phrases[p][1].value) for p in picks
            }

    def providers(self, provider) -> Providers:
        return Providers(embedder=provider, sentiment=self.lexicon, cache=EmbeddingCache())


@pytest.fixture(scope="session")
def planted_world():
    return PlantedWorld(n_topics=12, n_reviews=500, seed=7)
