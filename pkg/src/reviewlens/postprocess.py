"""Reconciles generated topics with the taxonomy.

Each generated topic is routed through syntactic matching (exact or
token-subsequence) and, failing that, semantic matching: very close names
replace the generated topic outright, moderately close names with verbatim
support surface it as an L4 subtopic, anything else becomes a proposed new
L3 topic.  The taxonomy itself is never mutated; proposals land in a
separate delta for human review.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional

import numpy as np

from .adapter import RawBundle
from .embedding import EmbeddingCache, EmbeddingProvider, embed_unit
from .errors import ConfigError
from .matching import best_topic_and_score
from .model import (
    GranularTopic,
    Insight,
    Polarity,
    Provenance,
    Taxonomy,
    TopicLevel,
    topic_slug,
    unique_preserving_order,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PostConfig:
    exact_replace: float = 0.95
    l4_topic: float = 0.7
    l4_verbatim: float = 0.4

    def __post_init__(self):
        if not 0 < self.l4_verbatim <= self.l4_topic <= self.exact_replace <= 1:
            raise ConfigError(
                "post thresholds must satisfy 0 < l4_verbatim <= l4_topic <= exact_replace <= 1, "
                f"got {self.l4_verbatim}, {self.l4_topic}, {self.exact_replace}"
            )


class PostOutcome(Enum):
    SYNTACTIC_EXACT = "SyntacticExact"
    SYNTACTIC_PARTIAL = "SyntacticPartial"
    REPLACED_SEMANTIC = "ReplacedSemantic"
    SURFACED_L4 = "SurfacedL4"
    SURFACED_NEW_L3 = "SurfacedNewL3"


@dataclass(frozen=True)
class PostDecision:
    input_topic: str
    outcome: PostOutcome
    matched: Optional[GranularTopic] = None
    parent: Optional[GranularTopic] = None
    scores: Optional[tuple[float, float]] = None
    topic_v: Optional[GranularTopic] = None  # Eq-11 argmax, recorded for audit only

    def to_dict(self) -> dict:
        return {
            "input_topic": self.input_topic,
            "outcome": self.outcome.value,
            "matched": self.matched.id if self.matched else None,
            "parent": self.parent.id if self.parent else None,
            "scores": list(self.scores) if self.scores else None,
            "topic_v": self.topic_v.id if self.topic_v else None,
        }


def _tokens(text: str) -> tuple[str, ...]:
    return tuple(text.casefold().split())


def _is_subsequence(needle: tuple[str, ...], haystack: tuple[str, ...]) -> bool:
    it = iter(haystack)
    return all(tok in it for tok in needle)


def syntactic_match(generated_topic: str, taxonomy: Taxonomy) -> Optional[GranularTopic]:
    """Exact case-folded name equality, else token subsequence (gT within t).

    Token-level containment keeps "zipper" inside "zipper quality" while
    "art" never matches "parts".  Ties break to the lowest topic id.
    """
    gt = generated_topic.strip()
    if not gt:
        raise ValueError("syntactic_match requires a non-empty generated topic")
    folded = gt.casefold()
    exact = [t for t in taxonomy.topics if t.name.casefold() == folded]
    if exact:
        return min(exact, key=lambda t: t.id)
    gt_tokens = _tokens(gt)
    partial = [t for t in taxonomy.topics if _is_subsequence(gt_tokens, _tokens(t.name))]
    if partial:
        return min(partial, key=lambda t: t.id)
    return None


def route_generated_topic(score_t: float, score_v: float, cfg: PostConfig) -> PostOutcome:
    """The threshold rules; all three comparisons are strictly greater-than."""
    if score_t > cfg.exact_replace:
        return PostOutcome.REPLACED_SEMANTIC
    if score_t > cfg.l4_topic and score_v > cfg.l4_verbatim:
        return PostOutcome.SURFACED_L4
    return PostOutcome.SURFACED_NEW_L3


def _l3_parent(topic: GranularTopic, taxonomy: Taxonomy) -> GranularTopic:
    if topic.level is TopicLevel.L3:
        return topic
    parent = taxonomy.get(topic.parent_l3) if topic.parent_l3 else None
    return parent if parent is not None else topic


def semantic_match(
    generated_topic: str,
    extracted_verbatim: Optional[str],
    taxonomy: Taxonomy,
    cfg: PostConfig,
    provider: EmbeddingProvider,
    cache: Optional[EmbeddingCache] = None,
) -> PostDecision:
    """Name-similarity and verbatim-to-keyword routing for unmatched topics."""
    topics = list(taxonomy.topics)
    if not topics:
        return PostDecision(
            input_topic=generated_topic,
            outcome=PostOutcome.SURFACED_NEW_L3,
            scores=(0.0, 0.0),
        )

    gt_vec = embed_unit(generated_topic, provider, cache)
    name_scores = [float(np.dot(gt_vec, embed_unit(t.name, provider, cache))) for t in topics]
    topic_sig = best_topic_and_score(topics, name_scores)
    score_t = topic_sig.score

    topic_v: Optional[GranularTopic] = None
    score_v = 0.0
    kw_topics = [t for t in topics if t.keywords]
    if extracted_verbatim and extracted_verbatim.strip() and kw_topics:
        ev_vec = embed_unit(extracted_verbatim, provider, cache)
        kw_scores = [
            max(float(np.dot(ev_vec, embed_unit(k, provider, cache))) for k in t.keywords)
            for t in kw_topics
        ]
        verb_sig = best_topic_and_score(kw_topics, kw_scores)
        topic_v = verb_sig.topic
        score_v = verb_sig.score

    outcome = route_generated_topic(score_t, score_v, cfg)
    matched = topic_sig.topic if outcome is PostOutcome.REPLACED_SEMANTIC else None
    parent = (
        _l3_parent(topic_sig.topic, taxonomy) if outcome is PostOutcome.SURFACED_L4 else None
    )
    return PostDecision(
        input_topic=generated_topic,
        outcome=outcome,
        matched=matched,
        parent=parent,
        scores=(score_t, score_v),
        topic_v=topic_v,
    )


@dataclass(frozen=True)
class DeltaTopic:
    name: str
    polarity: Polarity
    parent_l3: Optional[str]
    keywords: tuple[str, ...]
    support: int

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "polarity": self.polarity.value,
            "parent_l3": self.parent_l3,
            "keywords": list(self.keywords),
            "support": self.support,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DeltaTopic":
        return cls(
            name=d["name"],
            polarity=Polarity(d["polarity"]),
            parent_l3=d.get("parent_l3"),
            keywords=tuple(d.get("keywords", ())),
            support=d.get("support", 1),
        )


@dataclass(frozen=True)
class TaxonomyDelta:
    proposed_l4: tuple[DeltaTopic, ...] = ()
    proposed_l3: tuple[DeltaTopic, ...] = ()

    def __len__(self) -> int:
        return len(self.proposed_l4) + len(self.proposed_l3)

    def to_dict(self) -> dict:
        return {
            "proposed_l4": [t.to_dict() for t in self.proposed_l4],
            "proposed_l3": [t.to_dict() for t in self.proposed_l3],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TaxonomyDelta":
        return cls(
            proposed_l4=tuple(DeltaTopic.from_dict(t) for t in d.get("proposed_l4", ())),
            proposed_l3=tuple(DeltaTopic.from_dict(t) for t in d.get("proposed_l3", ())),
        )


@dataclass(frozen=True)
class RoutedInsight:
    review_id: str
    insight: Optional[Insight]  # None when the bundle item carried no verbatims
    decision: PostDecision


@dataclass(frozen=True)
class PostprocessResult:
    insights: tuple[Insight, ...]
    delta: TaxonomyDelta
    routed: tuple[RoutedInsight, ...]


class _DeltaBuilder:
    def __init__(self):
        self._entries: dict[str, dict] = {}

    def add(self, name: str, polarity: Polarity, parent_l3: Optional[str], verbatims) -> None:
        key = name.casefold()
        entry = self._entries.get(key)
        if entry is None:
            self._entries[key] = {
                "name": name,
                "polarity": polarity,
                "parent_l3": parent_l3,
                "keywords": list(verbatims),
                "support": 1,
            }
        else:
            entry["support"] += 1
            entry["keywords"].extend(verbatims)

    def build(self) -> tuple[DeltaTopic, ...]:
        return tuple(
            DeltaTopic(
                name=e["name"],
                polarity=e["polarity"],
                parent_l3=e["parent_l3"],
                keywords=unique_preserving_order(e["keywords"]),
                support=e["support"],
            )
            for e in self._entries.values()
        )


def apply_postprocessing(
    bundles: Iterable[RawBundle],
    taxonomy: Taxonomy,
    cfg: PostConfig,
    provider: EmbeddingProvider,
    cache: Optional[EmbeddingCache] = None,
) -> PostprocessResult:
    """Routes every generated topic to exactly one outcome.

    Insights carry provenance; proposed L4/new-L3 topics accumulate into a
    delta deduplicated by case-folded name, with verbatims as draft
    keywords so the delta can be reviewed (or applied) downstream.
    """
    routed: list[RoutedInsight] = []
    l4_builder = _DeltaBuilder()
    l3_builder = _DeltaBuilder()

    for bundle in bundles:
        for item in bundle.items:
            try:
                polarity = Polarity(item.polarity)
            except ValueError:
                log.warning(
                    "skipping item with invalid polarity %r in bundle %s",
                    item.polarity,
                    bundle.review_id,
                )
                continue
            if polarity is Polarity.NEUTRAL:
                log.warning("skipping neutral item %r in bundle %s", item.topic, bundle.review_id)
                continue
            gt = item.topic.strip()
            if not gt:
                log.warning("skipping empty topic in bundle %s", bundle.review_id)
                continue

            syn = syntactic_match(gt, taxonomy)
            if syn is not None:
                outcome = (
                    PostOutcome.SYNTACTIC_EXACT
                    if syn.name.casefold() == gt.casefold()
                    else PostOutcome.SYNTACTIC_PARTIAL
                )
                decision = PostDecision(input_topic=gt, outcome=outcome, matched=syn)
                topic: GranularTopic | str = syn
                provenance = Provenance.GENERATED_EXISTING
            else:
                first_verbatim = item.verbatims[0] if item.verbatims else None
                decision = semantic_match(gt, first_verbatim, taxonomy, cfg, provider, cache)
                if decision.outcome is PostOutcome.REPLACED_SEMANTIC:
                    topic = decision.matched
                    provenance = Provenance.GENERATED_EXISTING
                elif decision.outcome is PostOutcome.SURFACED_L4:
                    topic = gt
                    provenance = Provenance.GENERATED_L4
                    l4_builder.add(gt, polarity, decision.parent.id, item.verbatims)
                else:
                    topic = gt
                    provenance = Provenance.GENERATED_NEW_L3
                    l3_builder.add(gt, polarity, None, item.verbatims)

            insight = (
                Insight(
                    topic=topic,
                    polarity=polarity,
                    verbatims=item.verbatims,
                    provenance=provenance,
                )
                if item.verbatims
                else None
            )
            routed.append(RoutedInsight(review_id=bundle.review_id, insight=insight, decision=decision))

    delta = TaxonomyDelta(proposed_l4=l4_builder.build(), proposed_l3=l3_builder.build())
    insights = tuple(r.insight for r in routed if r.insight is not None)
    return PostprocessResult(insights=insights, delta=delta, routed=tuple(routed))


def apply_delta(taxonomy: Taxonomy, delta: TaxonomyDelta) -> Taxonomy:
    """Folds accepted delta proposals into a new taxonomy version."""
    topics = list(taxonomy.topics)
    names = {(t.name.casefold(), t.polarity) for t in topics}
    ids = {t.id for t in topics}

    for dt in delta.proposed_l3:
        key = (dt.name.casefold(), dt.polarity)
        new_id = topic_slug(dt.name, dt.polarity)
        if key in names or new_id in ids:
            continue
        topics.append(
            GranularTopic(
                id=new_id,
                name=dt.name,
                hinge="",
                coarse="",
                polarity=dt.polarity,
                keywords=dt.keywords or (dt.name,),
            )
        )
        names.add(key)
        ids.add(new_id)

    by_id = {t.id: t for t in topics}
    for dt in delta.proposed_l4:
        parent = by_id.get(dt.parent_l3) if dt.parent_l3 else None
        if parent is None:
            log.warning("skipping proposed L4 %r: parent %r not in taxonomy", dt.name, dt.parent_l3)
            continue
        key = (dt.name.casefold(), dt.polarity)
        new_id = topic_slug(dt.name, dt.polarity) + "-l4"
        if key in names or new_id in ids:
            continue
        topics.append(
            GranularTopic(
                id=new_id,
                name=dt.name,
                hinge=parent.hinge,
                coarse=parent.coarse,
                polarity=dt.polarity,
                keywords=dt.keywords or (dt.name,),
                level=TopicLevel.L4,
                parent_l3=parent.id,
            )
        )
        names.add(key)
        ids.add(new_id)

    return Taxonomy(topics=tuple(topics), version=taxonomy.version + 1)


def insight_rows(result: PostprocessResult, taxonomy: Taxonomy) -> list[dict]:
    """Hierarchical output rows: L1/L2/L3 (and L4) plus polarity and verbatims."""
    rows = []
    for r in result.routed:
        if r.insight is None:
            continue
        insight = r.insight
        row: dict = {"review_id": r.review_id}
        topic = insight.topic
        if isinstance(topic, GranularTopic):
            if topic.level is TopicLevel.L4:
                parent = _l3_parent(topic, taxonomy)
                row.update(L1=topic.coarse, L2=topic.hinge, L3=parent.name, L4=topic.name)
            else:
                row.update(L1=topic.coarse, L2=topic.hinge, L3=topic.name)
        elif insight.provenance is Provenance.GENERATED_L4 and r.decision.parent is not None:
            parent = r.decision.parent
            row.update(L1=parent.coarse, L2=parent.hinge, L3=parent.name, L4=topic)
        else:
            row.update(L1=None, L2=None, L3=topic)
        row["polarity"] = insight.polarity.value
        row["verbatims"] = list(insight.verbatims)
        row["provenance"] = insight.provenance.value
        rows.append(row)
    return rows
