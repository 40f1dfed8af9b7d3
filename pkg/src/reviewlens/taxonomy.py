"""Semi-supervised taxonomy construction.

Threshold clustering groups polarized segments into topic candidates;
annotators edit an exported review file (merge, name, place in the
hierarchy) and the import builds a draft taxonomy whose keywords are the
cluster members.  Two cleaning passes then remove redundant keywords
within a topic and ambiguous keywords shared across topics.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from . import kernels
from .embedding import EmbeddingCache, EmbeddingProvider, embed_unit
from .errors import ConfigError, DataError
from .model import (
    GranularTopic,
    Polarity,
    Segment,
    Taxonomy,
    TopicLevel,
    topic_slug,
    unique_preserving_order,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClusterConfig:
    sim_threshold: float = 0.75
    min_cluster_size: int = 3

    def __post_init__(self):
        if not 0 < self.sim_threshold < 1:
            raise ConfigError(f"cluster.sim_threshold must be in (0, 1), got {self.sim_threshold}")
        if self.min_cluster_size < 1:
            raise ConfigError(
                f"cluster.min_cluster_size must be >= 1, got {self.min_cluster_size}"
            )


@dataclass(frozen=True)
class CleanConfig:
    delta_intra: float = 0.9
    delta_e: float = 0.85

    def __post_init__(self):
        if not 0 < self.delta_intra < 1:
            raise ConfigError(f"clean.delta_intra must be in (0, 1), got {self.delta_intra}")
        if not 0 < self.delta_e < 1:
            raise ConfigError(f"clean.delta_e must be in (0, 1), got {self.delta_e}")


@dataclass(frozen=True)
class Cluster:
    id: str
    polarity: Polarity
    members: tuple[str, ...]
    representative: str

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "polarity": self.polarity.value,
            "members": list(self.members),
            "representative": self.representative,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Cluster":
        return cls(
            id=d["id"],
            polarity=Polarity(d["polarity"]),
            members=tuple(d["members"]),
            representative=d["representative"],
        )


@dataclass(frozen=True)
class ReviewCluster:
    """One editable row of the annotator review file."""

    cluster_id: str
    polarity: Polarity
    members: tuple[str, ...]
    suggested_name: str = ""
    merge_into: Optional[str] = None
    assigned_hinge: str = ""
    assigned_coarse: str = ""

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))

    def to_dict(self) -> dict:
        return {
            "cluster_id": self.cluster_id,
            "polarity": self.polarity.value,
            "members": list(self.members),
            "suggested_name": self.suggested_name,
            "merge_into": self.merge_into,
            "assigned_hinge": self.assigned_hinge,
            "assigned_coarse": self.assigned_coarse,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReviewCluster":
        return cls(
            cluster_id=d["cluster_id"],
            polarity=Polarity(d["polarity"]),
            members=tuple(d["members"]),
            suggested_name=d.get("suggested_name", ""),
            merge_into=d.get("merge_into"),
            assigned_hinge=d.get("assigned_hinge", ""),
            assigned_coarse=d.get("assigned_coarse", ""),
        )


@dataclass(frozen=True)
class ReviewFile:
    clusters: tuple[ReviewCluster, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "clusters", tuple(self.clusters))

    def to_dict(self) -> dict:
        return {"clusters": [c.to_dict() for c in self.clusters]}

    @classmethod
    def from_dict(cls, d: dict) -> "ReviewFile":
        return cls(clusters=tuple(ReviewCluster.from_dict(c) for c in d.get("clusters", ())))


def fast_cluster(
    segments: Sequence[Segment],
    polarity: Polarity,
    cfg: ClusterConfig,
    provider: EmbeddingProvider,
    cache: Optional[EmbeddingCache] = None,
) -> list[Cluster]:
    """Greedy community detection over the cosine >= threshold graph.

    Candidate centers are processed in decreasing neighbor-count order
    (ties by input position); each claims its still-unassigned neighbors
    when the group reaches min_cluster_size.  Unclaimed texts stay
    unclustered.
    """
    for s in segments:
        if s.polarity is not polarity:
            raise ValueError(
                f"segment {s.review_id}@{s.char_span} has polarity "
                f"{s.polarity and s.polarity.value}, expected {polarity.value}"
            )
    texts = [s.text for s in segments]
    if not texts:
        return []
    vectors = np.stack([embed_unit(t, provider, cache) for t in texts])
    labels = kernels.greedy_threshold_labels(vectors, cfg.sim_threshold, cfg.min_cluster_size)

    clusters: list[Cluster] = []
    for label in range(int(labels.max()) + 1 if labels.size else 0):
        idx = np.flatnonzero(labels == label)
        sub = vectors[idx]
        sims = sub @ sub.T
        if len(idx) == 1:
            rep_pos = 0
        else:
            mean_to_others = (sims.sum(axis=1) - sims.diagonal()) / (len(idx) - 1)
            rep_pos = int(np.argmax(mean_to_others))
        # keep the type invariant: every member within threshold of the
        # representative; stragglers fall back to unclustered
        keep = sims[rep_pos] >= cfg.sim_threshold
        keep[rep_pos] = True
        if int(keep.sum()) < cfg.min_cluster_size:
            continue
        members = tuple(texts[i] for i in idx[keep])
        clusters.append(
            Cluster(
                id=f"{polarity.value}-{len(clusters):03d}",
                polarity=polarity,
                members=members,
                representative=texts[idx[rep_pos]],
            )
        )
    return clusters


def export_review_file(clusters: Sequence[Cluster]) -> ReviewFile:
    return ReviewFile(
        clusters=tuple(
            ReviewCluster(cluster_id=c.id, polarity=c.polarity, members=c.members)
            for c in clusters
        )
    )


def _merge_target(
    cluster_id: str, by_id: Mapping[str, ReviewCluster]
) -> str:
    seen = [cluster_id]
    current = by_id[cluster_id]
    while current.merge_into is not None:
        nxt = current.merge_into
        if nxt not in by_id:
            raise DataError(f"cluster {current.cluster_id!r} merges into unknown cluster {nxt!r}")
        if nxt in seen:
            raise DataError("merge_into cycle: " + " -> ".join(seen + [nxt]))
        seen.append(nxt)
        current = by_id[nxt]
    return current.cluster_id


def import_review_file(review_file: ReviewFile) -> Taxonomy:
    """Builds a draft taxonomy (version 1) from an annotated review file."""
    by_id: dict[str, ReviewCluster] = {}
    for c in review_file.clusters:
        if c.cluster_id in by_id:
            raise DataError(f"duplicate cluster id {c.cluster_id!r} in review file")
        by_id[c.cluster_id] = c

    merged_members: dict[str, list[str]] = {}
    for c in review_file.clusters:
        target = _merge_target(c.cluster_id, by_id)
        if by_id[target].polarity is not c.polarity:
            raise DataError(
                f"cluster {c.cluster_id!r} ({c.polarity.value}) cannot merge into "
                f"{target!r} ({by_id[target].polarity.value})"
            )
        merged_members.setdefault(target, []).extend(c.members)

    topics: list[GranularTopic] = []
    seen_keys: set[tuple[str, Polarity]] = set()
    hinge_coarse: dict[str, str] = {}
    for c in review_file.clusters:
        if c.merge_into is not None:
            continue
        name = c.suggested_name.strip()
        if not name:
            raise DataError(f"surviving cluster {c.cluster_id!r} has no suggested_name")
        hinge = c.assigned_hinge.strip()
        coarse = c.assigned_coarse.strip()
        if not hinge or not coarse:
            raise DataError(
                f"surviving cluster {c.cluster_id!r} needs assigned_hinge and assigned_coarse"
            )
        prior = hinge_coarse.setdefault(hinge, coarse)
        if prior != coarse:
            raise DataError(
                f"hinge {hinge!r} assigned to two coarse topics ({prior!r} and {coarse!r})"
            )
        key = (name.casefold(), c.polarity)
        if key in seen_keys:
            raise DataError(f"two clusters would create topic ({name!r}, {c.polarity.value})")
        seen_keys.add(key)
        topics.append(
            GranularTopic(
                id=topic_slug(name, c.polarity),
                name=name,
                hinge=hinge,
                coarse=coarse,
                polarity=c.polarity,
                keywords=unique_preserving_order(merged_members.get(c.cluster_id, ())),
            )
        )
    return Taxonomy(topics=tuple(topics), version=1)


def intra_cluster_clean(
    keywords: Sequence[str],
    cfg: CleanConfig,
    provider: EmbeddingProvider,
    cache: Optional[EmbeddingCache] = None,
) -> list[str]:
    """Removes redundant keywords: the later of any pair above delta_intra.

    Scans all pairs (i < j) in input order and deletes j, so the surviving
    set has no pair above the threshold and keeps input order.
    """
    if len(keywords) <= 1:
        return list(keywords)
    vectors = np.stack([embed_unit(k, provider, cache) for k in keywords])
    keep = kernels.suppress_later_mask(vectors, cfg.delta_intra)
    return [kw for kw, ok in zip(keywords, keep) if ok]


def inter_cluster_clean(
    topic_keywords: Mapping[str, Sequence[str]],
    cfg: CleanConfig,
    provider: EmbeddingProvider,
    cache: Optional[EmbeddingCache] = None,
) -> dict[str, list[str]]:
    """Removes ambiguous keywords: both sides of any cross-topic pair above delta_e.

    Within-topic pairs are untouched.  Topics emptied by the sweep are
    reported at WARNING level.
    """
    flat: list[str] = []
    groups: list[int] = []
    keys = list(topic_keywords.keys())
    for gi, key in enumerate(keys):
        for kw in topic_keywords[key]:
            flat.append(kw)
            groups.append(gi)
    if not flat:
        return {key: list(topic_keywords[key]) for key in keys}
    vectors = np.stack([embed_unit(k, provider, cache) for k in flat])
    remove = kernels.cross_group_remove_mask(
        vectors, np.asarray(groups, dtype=np.int64), cfg.delta_e
    )
    out: dict[str, list[str]] = {key: [] for key in keys}
    for kw, gi, rm in zip(flat, groups, remove):
        if not rm:
            out[keys[gi]].append(kw)
    for key in keys:
        if topic_keywords[key] and not out[key]:
            log.warning("inter-cluster cleaning removed every keyword of topic %r", key)
    return out


def clean_taxonomy(
    taxonomy: Taxonomy,
    cfg: CleanConfig,
    provider: EmbeddingProvider,
    cache: Optional[EmbeddingCache] = None,
) -> Taxonomy:
    """Intra-topic then cross-topic keyword cleaning; bumps the version."""
    intra = {
        t.id: intra_cluster_clean(list(t.keywords), cfg, provider, cache)
        for t in taxonomy.topics
    }
    cleaned = inter_cluster_clean(intra, cfg, provider, cache)
    topics = tuple(
        GranularTopic(
            id=t.id,
            name=t.name,
            hinge=t.hinge,
            coarse=t.coarse,
            polarity=t.polarity,
            keywords=tuple(cleaned[t.id]),
            level=t.level,
            parent_l3=t.parent_l3,
        )
        for t in taxonomy.topics
    )
    return Taxonomy(topics=topics, version=taxonomy.version + 1)


@dataclass(frozen=True)
class QualityReport:
    """Programmatic proxies for the manual exclusivity/exhaustivity review."""

    exclusivity: float
    pairs_total: int
    pairs_offending: int
    counts: dict[str, int]
    keyword_overlap_histogram: tuple[int, ...]
    delta_e: float

    def to_dict(self) -> dict:
        return {
            "exclusivity": self.exclusivity,
            "pairs_total": self.pairs_total,
            "pairs_offending": self.pairs_offending,
            "counts": dict(self.counts),
            "keyword_overlap_histogram": list(self.keyword_overlap_histogram),
            "delta_e": self.delta_e,
        }


def taxonomy_quality_report(
    taxonomy: Taxonomy,
    provider: EmbeddingProvider,
    cache: Optional[EmbeddingCache] = None,
    cfg: CleanConfig | None = None,
) -> QualityReport:
    """Exclusivity proxy over same-polarity L3 name pairs plus level counts.

    Taxonomies legitimately reuse one topic name across polarities, so
    only same-polarity pairs can count against exclusivity.
    """
    cfg = cfg or CleanConfig()
    l3 = [t for t in taxonomy.topics if t.level is TopicLevel.L3]
    counts = {
        "coarse": len({t.coarse for t in taxonomy.topics if t.coarse}),
        "hinge": len({t.hinge for t in taxonomy.topics if t.hinge}),
        "l3": len(l3),
        "l4": sum(1 for t in taxonomy.topics if t.level is TopicLevel.L4),
    }
    pairs_total = 0
    pairs_offending = 0
    histogram = [0] * 10
    for i in range(len(l3)):
        for j in range(i + 1, len(l3)):
            a, b = l3[i], l3[j]
            if a.polarity is not b.polarity:
                continue
            pairs_total += 1
            name_sim = _pair_sim(a.name, b.name, provider, cache)
            if name_sim > cfg.delta_e:
                pairs_offending += 1
            overlap = _max_keyword_sim(a, b, provider, cache)
            bin_idx = min(9, max(0, int(overlap * 10)))
            histogram[bin_idx] += 1
    exclusivity = 1.0 if pairs_total == 0 else 1.0 - pairs_offending / pairs_total
    return QualityReport(
        exclusivity=exclusivity,
        pairs_total=pairs_total,
        pairs_offending=pairs_offending,
        counts=counts,
        keyword_overlap_histogram=tuple(histogram),
        delta_e=cfg.delta_e,
    )


def _pair_sim(a: str, b: str, provider, cache) -> float:
    return float(np.dot(embed_unit(a, provider, cache), embed_unit(b, provider, cache)))


def _max_keyword_sim(a: GranularTopic, b: GranularTopic, provider, cache) -> float:
    if not a.keywords or not b.keywords:
        return 0.0
    va = np.stack([embed_unit(k, provider, cache) for k in a.keywords])
    vb = np.stack([embed_unit(k, provider, cache) for k in b.keywords])
    return float((va @ vb.T).max())
