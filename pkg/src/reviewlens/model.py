"""Core domain types: reviews, segments, topics, taxonomies, insights.

All types are immutable value objects with JSON dict codecs; sequences are
stored as tuples so instances are safe to share across threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Optional

from .errors import DataError


class Polarity(Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    NEUTRAL = "neutral"


class TopicLevel(Enum):
    L3 = "L3"
    L4 = "L4"


class Provenance(Enum):
    MATCHED = "Matched"
    GENERATED_EXISTING = "GeneratedExisting"
    GENERATED_L4 = "GeneratedL4"
    GENERATED_NEW_L3 = "GeneratedNewL3"


_SLUG_RE = re.compile(r"[^a-z0-9]+")


def topic_slug(name: str, polarity: Polarity) -> str:
    """Stable topic id derived from (name, polarity) at creation time.

    Renaming a topic later does not change its id, so references held by
    insights or review files never go stale.
    """
    base = _SLUG_RE.sub("-", name.strip().casefold()).strip("-")
    return f"{base}-{polarity.value}"


@dataclass(frozen=True)
class Review:
    id: str
    text: str
    category: Optional[str] = None

    def __post_init__(self):
        if not self.text.strip():
            raise DataError(f"review {self.id!r} has empty text")

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"id": self.id, "text": self.text}
        if self.category is not None:
            d["category"] = self.category
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Review":
        return cls(id=d["id"], text=d["text"], category=d.get("category"))


@dataclass(frozen=True)
class Segment:
    """A phrase extracted from a review.

    char_span holds byte offsets into the UTF-8 encoding of the source
    review text; the segmenter only splits at ASCII delimiters so the
    offsets always fall on character boundaries.  polarity and the two
    scores stay None until sentiment classification runs.
    """

    review_id: str
    text: str
    char_span: tuple[int, int]
    polarity: Optional[Polarity] = None
    pos_score: Optional[float] = None
    neg_score: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "char_span", tuple(self.char_span))
        start, end = self.char_span
        if not (0 <= start < end):
            raise DataError(f"segment of review {self.review_id!r} has bad span {self.char_span}")

    def to_dict(self) -> dict:
        return {
            "review_id": self.review_id,
            "text": self.text,
            "char_span": list(self.char_span),
            "polarity": self.polarity.value if self.polarity else None,
            "pos_score": self.pos_score,
            "neg_score": self.neg_score,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Segment":
        pol = d.get("polarity")
        return cls(
            review_id=d["review_id"],
            text=d["text"],
            char_span=tuple(d["char_span"]),
            polarity=Polarity(pol) if pol else None,
            pos_score=d.get("pos_score"),
            neg_score=d.get("neg_score"),
        )


@dataclass(frozen=True)
class GranularTopic:
    id: str
    name: str
    hinge: str
    coarse: str
    polarity: Polarity
    keywords: tuple[str, ...] = ()
    level: TopicLevel = TopicLevel.L3
    parent_l3: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "keywords", tuple(self.keywords))
        if self.level is TopicLevel.L4 and not self.parent_l3:
            raise DataError(f"L4 topic {self.id!r} must reference a parent L3 topic")
        if self.level is TopicLevel.L3 and self.parent_l3:
            raise DataError(f"L3 topic {self.id!r} must not carry parent_l3")

    def to_dict(self) -> dict:
        d: dict[str, Any] = {
            "id": self.id,
            "name": self.name,
            "hinge": self.hinge,
            "coarse": self.coarse,
            "polarity": self.polarity.value,
            "keywords": list(self.keywords),
            "level": self.level.value,
        }
        if self.parent_l3 is not None:
            d["parent_l3"] = self.parent_l3
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GranularTopic":
        return cls(
            id=d["id"],
            name=d["name"],
            hinge=d["hinge"],
            coarse=d["coarse"],
            polarity=Polarity(d["polarity"]),
            keywords=tuple(d.get("keywords", ())),
            level=TopicLevel(d.get("level", "L3")),
            parent_l3=d.get("parent_l3"),
        )


@dataclass(frozen=True)
class Taxonomy:
    topics: tuple[GranularTopic, ...] = ()
    version: int = 0

    def __post_init__(self):
        object.__setattr__(self, "topics", tuple(self.topics))

    def get(self, topic_id: str) -> Optional[GranularTopic]:
        for t in self.topics:
            if t.id == topic_id:
                return t
        return None

    def level3(self, polarity: Optional[Polarity] = None) -> tuple[GranularTopic, ...]:
        return tuple(
            t
            for t in self.topics
            if t.level is TopicLevel.L3 and (polarity is None or t.polarity is polarity)
        )

    def to_dict(self) -> dict:
        return {"version": self.version, "topics": [t.to_dict() for t in self.topics]}

    @classmethod
    def from_dict(cls, d: dict) -> "Taxonomy":
        return cls(
            topics=tuple(GranularTopic.from_dict(t) for t in d.get("topics", ())),
            version=d.get("version", 0),
        )


@dataclass(frozen=True)
class Insight:
    """The pipeline's unit of output: (granular topic, polarity, verbatims).

    topic is a GranularTopic when it resolved against a taxonomy and a bare
    string when it is a free-form generated name awaiting review.
    """

    topic: GranularTopic | str
    polarity: Polarity
    verbatims: tuple[str, ...]
    provenance: Provenance

    def __post_init__(self):
        object.__setattr__(self, "verbatims", tuple(self.verbatims))
        if not self.verbatims:
            raise DataError("insight must carry at least one verbatim")
        if self.polarity is Polarity.NEUTRAL:
            raise DataError("insight polarity must be positive or negative")

    @property
    def topic_name(self) -> str:
        return self.topic.name if isinstance(self.topic, GranularTopic) else self.topic

    def to_dict(self) -> dict:
        d: dict[str, Any] = {
            "polarity": self.polarity.value,
            "verbatims": list(self.verbatims),
            "provenance": self.provenance.value,
        }
        if isinstance(self.topic, GranularTopic):
            d["topic"] = self.topic.to_dict()
        else:
            d["topic"] = self.topic
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Insight":
        raw = d["topic"]
        topic = GranularTopic.from_dict(raw) if isinstance(raw, dict) else raw
        return cls(
            topic=topic,
            polarity=Polarity(d["polarity"]),
            verbatims=tuple(d["verbatims"]),
            provenance=Provenance(d["provenance"]),
        )


@dataclass(frozen=True)
class LabelledRecord:
    review: Review
    insights: tuple[Insight, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "insights", tuple(self.insights))

    def to_dict(self) -> dict:
        return {"review": self.review.to_dict(), "insights": [i.to_dict() for i in self.insights]}

    @classmethod
    def from_dict(cls, d: dict) -> "LabelledRecord":
        return cls(
            review=Review.from_dict(d["review"]),
            insights=tuple(Insight.from_dict(i) for i in d.get("insights", ())),
        )


def validate_taxonomy(taxonomy: Taxonomy) -> list[str]:
    """Check every taxonomy invariant; violations are data, not failures.

    Returns a list of human-readable violation strings, each naming the
    offending topic id and the rule it breaks.  An empty list means the
    taxonomy is internally consistent.
    """
    violations: list[str] = []
    seen_ids: dict[str, GranularTopic] = {}
    seen_names: dict[tuple[str, Polarity], str] = {}
    hinge_coarse: dict[str, str] = {}
    l3_ids = {t.id for t in taxonomy.topics if t.level is TopicLevel.L3}

    for t in taxonomy.topics:
        if t.id in seen_ids:
            violations.append(f"{t.id}: duplicate topic id")
        else:
            seen_ids[t.id] = t

        key = (t.name.casefold(), t.polarity)
        if key in seen_names:
            violations.append(
                f"{t.id}: duplicate (name, polarity) ({t.name!r}, {t.polarity.value}) "
                f"already used by {seen_names[key]}"
            )
        else:
            seen_names[key] = t.id

        if t.polarity is Polarity.NEUTRAL:
            violations.append(f"{t.id}: topic polarity must be positive or negative")

        if t.hinge:
            prior = hinge_coarse.get(t.hinge)
            if prior is None:
                hinge_coarse[t.hinge] = t.coarse
            elif prior != t.coarse:
                violations.append(
                    f"{t.id}: hinge {t.hinge!r} assigned to two coarse topics "
                    f"({prior!r} and {t.coarse!r})"
                )

        if t.level is TopicLevel.L4 and t.parent_l3 not in l3_ids:
            violations.append(f"{t.id}: parent_l3 {t.parent_l3!r} is not an existing L3 topic")

        if t.level is TopicLevel.L3 and not t.keywords:
            violations.append(f"{t.id}: L3 topic has no keywords and cannot be matched")

    return violations


def unique_preserving_order(items: Iterable[str]) -> tuple[str, ...]:
    seen: set[str] = set()
    out: list[str] = []
    for item in items:
        if item not in seen:
            seen.add(item)
            out.append(item)
    return tuple(out)
