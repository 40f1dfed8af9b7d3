"""Multi-label metrics over (granular topic, polarity) labels, verbatim
correctness/completeness, and topic-distribution statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .embedding import EmbeddingCache, EmbeddingProvider, sim_st
from .model import LabelledRecord

Label = tuple[str, str]  # (casefolded L3 name, polarity value)


@dataclass(frozen=True)
class EvalPair:
    gold: LabelledRecord
    predicted: LabelledRecord

    def __post_init__(self):
        if self.gold.review.id != self.predicted.review.id:
            raise ValueError(
                f"gold/predicted review id mismatch: "
                f"{self.gold.review.id!r} vs {self.predicted.review.id!r}"
            )


def pair_records(
    gold: Iterable[LabelledRecord], predicted: Iterable[LabelledRecord]
) -> list[EvalPair]:
    """Aligns records by review id; a missing side counts as empty insights."""
    gold_by_id = {r.review.id: r for r in gold}
    pred_by_id = {r.review.id: r for r in predicted}
    pairs = []
    for rid, g in gold_by_id.items():
        p = pred_by_id.get(rid, LabelledRecord(review=g.review, insights=()))
        pairs.append(EvalPair(gold=g, predicted=p))
    for rid, p in pred_by_id.items():
        if rid not in gold_by_id:
            pairs.append(EvalPair(gold=LabelledRecord(review=p.review, insights=()), predicted=p))
    return pairs


def record_labels(record: LabelledRecord) -> set[Label]:
    return {(i.topic_name.casefold(), i.polarity.value) for i in record.insights}


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    # conventions when a denominator is zero: perfect if nothing was
    # expected and nothing came, otherwise zero
    p = tp / (tp + fp) if tp + fp else (1.0 if fn == 0 else 0.0)
    r = tp / (tp + fn) if tp + fn else (1.0 if fp == 0 else 0.0)
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f1


def topic_prf(pairs: Sequence[EvalPair], mode: str = "micro") -> tuple[float, float, float]:
    """(precision, recall, F1) over (L3 name, polarity) label sets.

    micro aggregates global TP/FP/FN; macro averages per-label scores over
    the labels present in gold.
    """
    if mode not in ("micro", "macro"):
        raise ValueError(f"mode must be 'micro' or 'macro', got {mode!r}")
    if mode == "micro":
        tp = fp = fn = 0
        for pair in pairs:
            g = record_labels(pair.gold)
            p = record_labels(pair.predicted)
            tp += len(g & p)
            fp += len(p - g)
            fn += len(g - p)
        return _prf(tp, fp, fn)

    per_label = per_label_counts(pairs)
    gold_labels = [label for label, c in per_label.items() if c["tp"] + c["fn"] > 0]
    if not gold_labels:
        return (1.0, 1.0, 1.0) if all(not record_labels(p.predicted) for p in pairs) else (0.0, 1.0, 0.0)
    ps, rs, f1s = [], [], []
    for label in gold_labels:
        c = per_label[label]
        p, r, f1 = _prf(c["tp"], c["fp"], c["fn"])
        ps.append(p)
        rs.append(r)
        f1s.append(f1)
    k = len(gold_labels)
    return sum(ps) / k, sum(rs) / k, sum(f1s) / k


def per_label_counts(pairs: Sequence[EvalPair]) -> dict[Label, dict]:
    counts: dict[Label, dict] = {}

    def bucket(label: Label) -> dict:
        return counts.setdefault(label, {"tp": 0, "fp": 0, "fn": 0})

    for pair in pairs:
        g = record_labels(pair.gold)
        p = record_labels(pair.predicted)
        for label in g & p:
            bucket(label)["tp"] += 1
        for label in p - g:
            bucket(label)["fp"] += 1
        for label in g - p:
            bucket(label)["fn"] += 1
    return counts


def verbatim_scores(
    pairs: Sequence[EvalPair],
    provider: EmbeddingProvider,
    cache: Optional[EmbeddingCache] = None,
    sim_floor: float = 0.8,
) -> tuple[float, float]:
    """(correctness, completeness) of predicted verbatims.

    A predicted verbatim counts as correct when some gold verbatim under
    the same (topic, polarity) label either reaches sim_floor cosine or
    coincides as a substring; completeness is the mirror-image fraction of
    gold verbatims recovered.  These definitions are this artifact's own;
    sim_floor is reported alongside every score.
    """

    def by_label(record: LabelledRecord) -> dict[Label, list[str]]:
        out: dict[Label, list[str]] = {}
        for i in record.insights:
            out.setdefault((i.topic_name.casefold(), i.polarity.value), []).extend(i.verbatims)
        return out

    def matches(a: str, b: str) -> bool:
        fa, fb = a.casefold().strip(), b.casefold().strip()
        if fa and fb and (fa in fb or fb in fa):
            return True
        return sim_st(a, b, provider, cache) >= sim_floor

    pred_total = pred_matched = gold_total = gold_matched = 0
    for pair in pairs:
        gold_map = by_label(pair.gold)
        pred_map = by_label(pair.predicted)
        for label, predicted in pred_map.items():
            golds = gold_map.get(label, [])
            for v in predicted:
                pred_total += 1
                if any(matches(v, g) for g in golds):
                    pred_matched += 1
        for label, golds in gold_map.items():
            predicted = pred_map.get(label, [])
            for g in golds:
                gold_total += 1
                if any(matches(g, v) for v in predicted):
                    gold_matched += 1

    correctness = pred_matched / pred_total if pred_total else (1.0 if gold_total == 0 else 0.0)
    completeness = gold_matched / gold_total if gold_total else 1.0
    return correctness, completeness


@dataclass(frozen=True)
class MetricReport:
    precision: float
    recall: float
    f1: float
    correctness: float
    completeness: float
    mode: str
    sim_floor: float
    per_topic: dict[str, dict]

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "correctness": self.correctness,
            "completeness": self.completeness,
            "mode": self.mode,
            "sim_floor": self.sim_floor,
            "per_topic": self.per_topic,
        }


def build_metric_report(
    pairs: Sequence[EvalPair],
    provider: EmbeddingProvider,
    cache: Optional[EmbeddingCache] = None,
    sim_floor: float = 0.8,
    mode: str = "micro",
) -> MetricReport:
    p, r, f1 = topic_prf(pairs, mode=mode)
    correctness, completeness = verbatim_scores(pairs, provider, cache, sim_floor)
    per_topic = {}
    for label, c in sorted(per_label_counts(pairs).items()):
        lp, lr, lf1 = _prf(c["tp"], c["fp"], c["fn"])
        per_topic[f"{label[0]}/{label[1]}"] = {
            "tp": c["tp"],
            "fp": c["fp"],
            "fn": c["fn"],
            "precision": lp,
            "recall": lr,
            "f1": lf1,
        }
    return MetricReport(
        precision=p,
        recall=r,
        f1=f1,
        correctness=correctness,
        completeness=completeness,
        mode=mode,
        sim_floor=sim_floor,
        per_topic=per_topic,
    )


@dataclass(frozen=True)
class CoverageCurve:
    """Topic supports sorted descending plus the cumulative coverage curve."""

    labels: tuple[str, ...]
    supports: tuple[int, ...]
    cumulative: tuple[float, ...]
    coverage_at: dict[int, float]

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "supports": list(self.supports),
            "cumulative": list(self.cumulative),
            "coverage_at_percent": {str(k): v for k, v in self.coverage_at.items()},
        }


COVERAGE_PERCENTS = (5, 10, 12, 25, 50)


def topic_distribution(records: Iterable[LabelledRecord]) -> CoverageCurve:
    """Mention counts per (topic, polarity), heaviest first, with the
    cumulative fraction of mentions covered by each prefix of topics."""
    counts: dict[Label, int] = {}
    for record in records:
        for insight in record.insights:
            label = (insight.topic_name.casefold(), insight.polarity.value)
            counts[label] = counts.get(label, 0) + 1
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    supports = tuple(c for _, c in ordered)
    total = sum(supports)
    cumulative = []
    running = 0
    for c in supports:
        running += c
        cumulative.append(running / total if total else 0.0)
    coverage_at = {}
    for pct in COVERAGE_PERCENTS:
        if not supports:
            coverage_at[pct] = 0.0
            continue
        top = max(1, math.ceil(pct / 100 * len(supports)))
        coverage_at[pct] = cumulative[min(top, len(supports)) - 1]
    return CoverageCurve(
        labels=tuple(f"{name}/{pol}" for (name, pol), _ in ordered),
        supports=supports,
        cumulative=tuple(cumulative),
        coverage_at=coverage_at,
    )
