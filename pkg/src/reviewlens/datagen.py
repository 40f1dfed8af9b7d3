"""Labelled-data generation: segment, gate by sentiment, match topics,
aggregate to review-level records, and serialize decomposed prompt/target
training pairs (one topic prompt plus a polarity and a verbatim prompt per
insight, 2N+1 in total)."""

from __future__ import annotations

import itertools
import random
import string
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .embedding import EmbeddingCache, EmbeddingProvider
from .errors import ConfigError
from .matching import MatchConfig, match_topic
from .model import Insight, LabelledRecord, Polarity, Provenance, Review, Taxonomy
from .segmentation import SegmenterConfig, segment_review
from .sentiment import SentimentClassifier, SentimentConfig, classify_segment

DEFAULT_TOPIC_Q = "identify the actionable topics discussed in the review : {review}"
DEFAULT_POLARITY_Q = (
    "identify the polarity for the topic <{topic}> in the review : {review}"
)
DEFAULT_VERBATIM_Q = (
    "extract the verbatims for the topic <{topic}> with polarity <{polarity}> "
    "from the review : {review}"
)

VERBATIM_SEPARATOR = " | "


def _check_slots(template: str, required: tuple[str, ...], label: str) -> None:
    counts = {name: 0 for name in required}
    for _, field_name, _, _ in string.Formatter().parse(template):
        if field_name is None:
            continue
        if field_name not in counts:
            raise ConfigError(f"template {label} has unknown slot {{{field_name}}}")
        counts[field_name] += 1
    for name, seen in counts.items():
        if seen != 1:
            raise ConfigError(
                f"template {label} must contain slot {{{name}}} exactly once, found {seen}"
            )


@dataclass(frozen=True)
class PromptTemplates:
    topic_q: str = DEFAULT_TOPIC_Q
    polarity_q: str = DEFAULT_POLARITY_Q
    verbatim_q: str = DEFAULT_VERBATIM_Q

    def __post_init__(self):
        _check_slots(self.topic_q, ("review",), "topic_q")
        _check_slots(self.polarity_q, ("review", "topic"), "polarity_q")
        _check_slots(self.verbatim_q, ("review", "topic", "polarity"), "verbatim_q")


class Phase(Enum):
    TOPIC = "topic"
    POLARITY = "polarity"
    VERBATIM = "verbatim"


@dataclass(frozen=True)
class TrainingPair:
    prompt: str
    target: str
    phase: Phase
    review_id: str

    def to_dict(self) -> dict:
        return {
            "prompt": self.prompt,
            "target": self.target,
            "phase": self.phase.value,
            "review_id": self.review_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingPair":
        return cls(
            prompt=d["prompt"],
            target=d["target"],
            phase=Phase(d["phase"]),
            review_id=d["review_id"],
        )


def format_topic_list(names: Sequence[str]) -> str:
    return "[" + ", ".join(names) + "]"


def parse_topic_list(text: str) -> tuple[list[str], bool]:
    """Parse a canonical topic list; returns (names, was_strict).

    The lenient fallback strips brackets and splits on commas.
    """
    stripped = text.strip()
    strict = stripped.startswith("[") and stripped.endswith("]")
    inner = stripped.strip("[]") if not strict else stripped[1:-1]
    names = [part.strip() for part in inner.split(",") if part.strip()]
    return names, strict


def format_verbatim_list(verbatims: Sequence[str]) -> str:
    return VERBATIM_SEPARATOR.join(verbatims)


def parse_verbatim_list(text: str) -> list[str]:
    return [part.strip() for part in text.split("|") if part.strip()]


@dataclass
class Providers:
    """Everything pluggable the pipeline needs at run time."""

    embedder: EmbeddingProvider
    sentiment: SentimentClassifier
    cache: EmbeddingCache = field(default_factory=EmbeddingCache)


@dataclass(frozen=True)
class StageCounts:
    segments: int = 0
    neutral_dropped: int = 0
    nomatch_dropped: int = 0

    def __add__(self, other: "StageCounts") -> "StageCounts":
        return StageCounts(
            self.segments + other.segments,
            self.neutral_dropped + other.neutral_dropped,
            self.nomatch_dropped + other.nomatch_dropped,
        )


def label_review_with_counts(
    review: Review,
    taxonomy: Taxonomy,
    seg_cfg: SegmenterConfig,
    sent_cfg: SentimentConfig,
    match_cfg: MatchConfig,
    providers: Providers,
) -> tuple[LabelledRecord, StageCounts]:
    segments = segment_review(review, seg_cfg)
    scored = [classify_segment(s, providers.sentiment, sent_cfg) for s in segments]
    polarized = [s for s in scored if s.polarity is not Polarity.NEUTRAL]
    neutral_dropped = len(scored) - len(polarized)

    grouped: dict[str, list[str]] = {}
    topics = {}
    nomatch = 0
    for seg in polarized:
        outcome = match_topic(seg, taxonomy, match_cfg, providers.embedder, providers.cache)
        if outcome.matched is None:
            nomatch += 1
            continue
        topics[outcome.matched.id] = outcome.matched
        grouped.setdefault(outcome.matched.id, []).append(seg.text)

    insights = tuple(
        Insight(
            topic=topics[topic_id],
            polarity=topics[topic_id].polarity,
            verbatims=tuple(verbatims),
            provenance=Provenance.MATCHED,
        )
        for topic_id, verbatims in grouped.items()
    )
    record = LabelledRecord(review=review, insights=insights)
    return record, StageCounts(len(segments), neutral_dropped, nomatch)


def label_review(
    review: Review,
    taxonomy: Taxonomy,
    seg_cfg: SegmenterConfig,
    sent_cfg: SentimentConfig,
    match_cfg: MatchConfig,
    providers: Providers,
) -> LabelledRecord:
    record, _ = label_review_with_counts(
        review, taxonomy, seg_cfg, sent_cfg, match_cfg, providers
    )
    return record


def generate_labelled(
    reviews: Iterable[Review],
    taxonomy: Taxonomy,
    seg_cfg: SegmenterConfig,
    sent_cfg: SentimentConfig,
    match_cfg: MatchConfig,
    providers: Providers,
) -> list[LabelledRecord]:
    return [
        label_review(r, taxonomy, seg_cfg, sent_cfg, match_cfg, providers) for r in reviews
    ]


def serialize_training_pairs(
    record: LabelledRecord, templates: PromptTemplates | None = None
) -> list[TrainingPair]:
    """One topic pair plus per-insight polarity and verbatim pairs (2N+1)."""
    tpl = templates or PromptTemplates()
    review = record.review
    names = [insight.topic_name for insight in record.insights]
    pairs = [
        TrainingPair(
            prompt=tpl.topic_q.format(review=review.text),
            target=format_topic_list(names),
            phase=Phase.TOPIC,
            review_id=review.id,
        )
    ]
    for insight in record.insights:
        pairs.append(
            TrainingPair(
                prompt=tpl.polarity_q.format(review=review.text, topic=insight.topic_name),
                target=insight.polarity.value,
                phase=Phase.POLARITY,
                review_id=review.id,
            )
        )
    for insight in record.insights:
        pairs.append(
            TrainingPair(
                prompt=tpl.verbatim_q.format(
                    review=review.text,
                    topic=insight.topic_name,
                    polarity=insight.polarity.value,
                ),
                target=format_verbatim_list(insight.verbatims),
                phase=Phase.VERBATIM,
                review_id=review.id,
            )
        )
    return pairs


def shuffle_augment(
    record: LabelledRecord, max_variants: int = 6, seed: int = 0
) -> list[LabelledRecord]:
    """Sentence-shuffling augmentation; labels are copied unchanged.

    Splits on full stops only and emits up to max_variants distinct
    non-identity orderings, deterministically for a given seed.
    """
    if max_variants < 0:
        raise ConfigError(f"max_variants must be >= 0, got {max_variants}")
    if max_variants == 0:
        return []
    sentences = [part.strip() for part in record.review.text.split(".") if part.strip()]
    n = len(sentences)
    if n < 2:
        return []
    original = tuple(sentences)
    rng = random.Random(seed)
    variants: list[tuple[str, ...]]
    if n <= 6:
        candidates = [p for p in dict.fromkeys(itertools.permutations(sentences)) if p != original]
        variants = (
            rng.sample(candidates, max_variants)
            if len(candidates) > max_variants
            else candidates
        )
    else:
        seen = {original}
        variants = []
        attempts = 0
        while len(variants) < max_variants and attempts < 50 * max_variants:
            attempts += 1
            order = sentences[:]
            rng.shuffle(order)
            t = tuple(order)
            if t not in seen:
                seen.add(t)
                variants.append(t)

    out = []
    for i, variant in enumerate(variants, start=1):
        review = Review(
            id=f"{record.review.id}#shuffle{i}",
            text=". ".join(variant),
            category=record.review.category,
        )
        out.append(LabelledRecord(review=review, insights=record.insights))
    return out
