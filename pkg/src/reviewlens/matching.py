"""Three-signal topic matching: assigns the best taxonomy topic to a segment.

Signals per candidate topic: cosine with the topic name, mean cosine with
the k closest keywords, and mean cosine with all keywords.  A fixed rule
cascade resolves them: any high-confidence signal wins outright, then
pairwise signal agreement, then the best three-signal average, else no
match.  Candidates are restricted to L3 topics of the segment's polarity.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .embedding import EmbeddingCache, EmbeddingProvider, embed_unit
from .errors import ConfigError, DataError
from .model import GranularTopic, Polarity, Segment, Taxonomy


@dataclass(frozen=True)
class MatchConfig:
    k: int = 5
    delta_h: float = 0.8
    delta_m: float = 0.3
    delta_avg: float = 0.5

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"match.k must be >= 1, got {self.k}")
        if not 0 < self.delta_m <= self.delta_h <= 1:
            raise ConfigError(
                f"match thresholds must satisfy 0 < delta_m <= delta_h <= 1, "
                f"got delta_m={self.delta_m}, delta_h={self.delta_h}"
            )
        if not 0 < self.delta_avg <= 1:
            raise ConfigError(f"match.delta_avg must be in (0, 1], got {self.delta_avg}")


@dataclass(frozen=True)
class SignalResult:
    topic: GranularTopic
    score: float


class MatchRule(Enum):
    HIGH_CONF_TKW = "HighConf_tkw"
    HIGH_CONF_N = "HighConf_n"
    HIGH_CONF_MKW = "HighConf_mkw"
    MAJORITY_TKW_N = "Majority_tkw_n"
    MAJORITY_MKW_TKW = "Majority_mkw_tkw"
    MAJORITY_N_MKW = "Majority_n_mkw"
    BEST_AVERAGE = "BestAverage"
    NO_MATCH = "NoMatch"


@dataclass(frozen=True)
class MatchSignals:
    name: SignalResult
    top_keywords: SignalResult
    mean_keywords: SignalResult
    average: SignalResult


@dataclass(frozen=True)
class MatchOutcome:
    matched: Optional[GranularTopic]
    rule_fired: MatchRule
    signals: MatchSignals

    def to_dict(self) -> dict:
        def sig(s: SignalResult) -> dict:
            return {"topic_id": s.topic.id, "topic_name": s.topic.name, "score": s.score}

        return {
            "matched": self.matched.id if self.matched else None,
            "matched_name": self.matched.name if self.matched else None,
            "rule_fired": self.rule_fired.value,
            "signals": {
                "name": sig(self.signals.name),
                "top_keywords": sig(self.signals.top_keywords),
                "mean_keywords": sig(self.signals.mean_keywords),
                "average": sig(self.signals.average),
            },
        }


def best_topic_and_score(
    topics: Sequence[GranularTopic], scores: Sequence[float]
) -> SignalResult:
    """Leading (topic, score); ties break to the lowest index."""
    if len(topics) == 0:
        raise ValueError("best_topic_and_score requires a non-empty topic list")
    if len(topics) != len(scores):
        raise ValueError(f"length mismatch: {len(topics)} topics vs {len(scores)} scores")
    best = 0
    for i in range(1, len(scores)):
        if scores[i] > scores[best]:
            best = i
    return SignalResult(topic=topics[best], score=float(scores[best]))


def _name_scores(
    seg_vec: np.ndarray,
    topics: Sequence[GranularTopic],
    provider: EmbeddingProvider,
    cache: Optional[EmbeddingCache],
) -> np.ndarray:
    return np.array(
        [float(np.dot(seg_vec, embed_unit(t.name, provider, cache))) for t in topics],
        dtype=np.float64,
    )


def _keyword_scores(
    seg_vec: np.ndarray,
    topics: Sequence[GranularTopic],
    provider: EmbeddingProvider,
    cache: Optional[EmbeddingCache],
    k: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-topic (mean of top-min(k, M) keyword cosines, mean of all)."""
    for t in topics:
        if not t.keywords:
            raise DataError(f"topic {t.id!r} has no keywords")
    offsets = np.zeros(len(topics) + 1, dtype=np.int64)
    rows = []
    for i, t in enumerate(topics):
        for kw in t.keywords:
            rows.append(embed_unit(kw, provider, cache))
        offsets[i + 1] = offsets[i] + len(t.keywords)
    sims = np.stack(rows) @ seg_vec
    return kernels.topk_means(sims, offsets, k)


def signal_name(
    segment: Segment,
    topics: Sequence[GranularTopic],
    provider: EmbeddingProvider,
    cache: Optional[EmbeddingCache] = None,
) -> SignalResult:
    if not topics:
        raise ValueError("signal_name requires at least one candidate topic")
    seg_vec = embed_unit(segment.text, provider, cache)
    return best_topic_and_score(topics, _name_scores(seg_vec, topics, provider, cache))


def signal_topk_keywords(
    segment: Segment,
    topics: Sequence[GranularTopic],
    provider: EmbeddingProvider,
    cache: Optional[EmbeddingCache] = None,
    k: int = 5,
) -> SignalResult:
    if not topics:
        raise ValueError("signal_topk_keywords requires at least one candidate topic")
    seg_vec = embed_unit(segment.text, provider, cache)
    top_means, _ = _keyword_scores(seg_vec, topics, provider, cache, k)
    return best_topic_and_score(topics, top_means)


def signal_mean_keywords(
    segment: Segment,
    topics: Sequence[GranularTopic],
    provider: EmbeddingProvider,
    cache: Optional[EmbeddingCache] = None,
) -> SignalResult:
    if not topics:
        raise ValueError("signal_mean_keywords requires at least one candidate topic")
    seg_vec = embed_unit(segment.text, provider, cache)
    _, all_means = _keyword_scores(seg_vec, topics, provider, cache, k=1)
    return best_topic_and_score(topics, all_means)


def resolve_cascade(
    name_sig: SignalResult,
    topk_sig: SignalResult,
    mean_sig: SignalResult,
    avg_sig: SignalResult,
    cfg: MatchConfig,
) -> tuple[Optional[GranularTopic], MatchRule]:
    """The rule cascade, evaluated strictly in order."""
    t_n, s_n = name_sig.topic, name_sig.score
    t_tkw, s_tkw = topk_sig.topic, topk_sig.score
    t_mkw, s_mkw = mean_sig.topic, mean_sig.score
    if s_tkw >= cfg.delta_h:
        return t_tkw, MatchRule.HIGH_CONF_TKW
    if s_n >= cfg.delta_h:
        return t_n, MatchRule.HIGH_CONF_N
    if s_mkw >= cfg.delta_h:
        return t_mkw, MatchRule.HIGH_CONF_MKW
    if t_tkw.id == t_n.id and s_tkw + s_n >= 2 * cfg.delta_m:
        return t_tkw, MatchRule.MAJORITY_TKW_N
    if t_mkw.id == t_tkw.id and s_mkw + s_tkw >= 2 * cfg.delta_m:
        return t_mkw, MatchRule.MAJORITY_MKW_TKW
    if t_n.id == t_mkw.id and s_n + s_mkw >= 2 * cfg.delta_m:
        return t_n, MatchRule.MAJORITY_N_MKW
    if avg_sig.score >= cfg.delta_avg:
        return avg_sig.topic, MatchRule.BEST_AVERAGE
    return None, MatchRule.NO_MATCH


def match_topic(
    segment: Segment,
    taxonomy: Taxonomy,
    cfg: MatchConfig,
    provider: EmbeddingProvider,
    cache: Optional[EmbeddingCache] = None,
) -> MatchOutcome:
    if segment.polarity not in (Polarity.POSITIVE, Polarity.NEGATIVE):
        raise ValueError(
            f"segment {segment.review_id}@{segment.char_span} must be polarized before matching"
        )
    candidates = taxonomy.level3(segment.polarity)
    if not candidates:
        raise DataError(f"taxonomy has no L3 topics with polarity {segment.polarity.value}")

    seg_vec = embed_unit(segment.text, provider, cache)
    name_scores = _name_scores(seg_vec, candidates, provider, cache)
    top_means, all_means = _keyword_scores(seg_vec, candidates, provider, cache, cfg.k)

    name_sig = best_topic_and_score(candidates, name_scores)
    topk_sig = best_topic_and_score(candidates, top_means)
    mean_sig = best_topic_and_score(candidates, all_means)
    avg_sig = best_topic_and_score(candidates, (name_scores + top_means + all_means) / 3.0)

    matched, rule = resolve_cascade(name_sig, topk_sig, mean_sig, avg_sig, cfg)
    signals = MatchSignals(
        name=name_sig, top_keywords=topk_sig, mean_keywords=mean_sig, average=avg_sig
    )
    return MatchOutcome(matched=matched, rule_fired=rule, signals=signals)
