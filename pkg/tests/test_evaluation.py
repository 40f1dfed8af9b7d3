import random

import numpy as np
import pytest

from reviewlens.evaluation import (
    EvalPair,
    build_metric_report,
    pair_records,
    topic_distribution,
    topic_prf,
    verbatim_scores,
)
from reviewlens.model import Insight, LabelledRecord, Provenance, Review

from conftest import POS, NEG


def rec(review_id, *label_verbatims):
    """label_verbatims: (topic_name, polarity, [verbatims]) triples."""
    insights = tuple(
        Insight(topic=name, polarity=pol, verbatims=tuple(verbs),
                provenance=Provenance.GENERATED_EXISTING)
        for name, pol, verbs in label_verbatims
    )
    return LabelledRecord(review=Review(id=review_id, text="text of " + review_id),
                          insights=insights)


def pair(gold, predicted):
    return EvalPair(gold=gold, predicted=predicted)


class TestTopicPRF:
    def test_identical_predictions_are_perfect(self):
        g = rec("r1", ("a", POS, ["v"]), ("b", NEG, ["w"]))
        assert topic_prf([pair(g, g)], "micro") == (1.0, 1.0, 1.0)
        assert topic_prf([pair(g, g)], "macro") == (1.0, 1.0, 1.0)

    def test_hand_counted_micro(self):
        # gold {A, B}, predicted {A, C}: TP=1 FP=1 FN=1
        g = rec("r1", ("a", POS, ["v"]), ("b", POS, ["v"]))
        p = rec("r1", ("a", POS, ["v"]), ("c", POS, ["v"]))
        precision, recall, f1 = topic_prf([pair(g, p)], "micro")
        assert (precision, recall, f1) == (0.5, 0.5, 0.5)

    def test_empty_predictions_conventions(self):
        g = rec("r1", ("a", POS, ["v"]))
        p = rec("r1")
        assert topic_prf([pair(g, p)], "micro") == (0.0, 0.0, 0.0)

    def test_polarity_is_part_of_the_label(self):
        g = rec("r1", ("a", POS, ["v"]))
        p = rec("r1", ("a", NEG, ["v"]))
        precision, recall, f1 = topic_prf([pair(g, p)], "micro")
        assert precision == 0.0 and recall == 0.0

    def test_micro_symmetry_swaps_precision_and_recall(self):
        rng = random.Random(3)
        labels = [f"t{i}" for i in range(6)]
        pairs = []
        for r in range(20):
            g = rec(f"r{r}", *[(l, POS, ["v"]) for l in rng.sample(labels, rng.randint(0, 4))])
            p = rec(f"r{r}", *[(l, POS, ["v"]) for l in rng.sample(labels, rng.randint(0, 4))])
            pairs.append(pair(g, p))
        swapped = [pair(x.predicted, x.gold) for x in pairs]
        p1, r1, f1 = topic_prf(pairs, "micro")
        p2, r2, f2 = topic_prf(swapped, "micro")
        assert p1 == pytest.approx(r2)
        assert r1 == pytest.approx(p2)
        assert f1 == pytest.approx(f2)

    def test_macro_averages_over_gold_labels(self):
        # label a: perfect; label b: missed entirely -> macro F1 = 0.5
        pairs = [
            pair(rec("r1", ("a", POS, ["v"]), ("b", POS, ["v"])),
                 rec("r1", ("a", POS, ["v"]))),
        ]
        precision, recall, f1 = topic_prf(pairs, "macro")
        assert f1 == pytest.approx(0.5)

    def test_f1_never_exceeds_max_of_p_and_r(self):
        rng = random.Random(5)
        labels = [f"t{i}" for i in range(5)]
        for _ in range(30):
            pairs = []
            for r in range(8):
                g = rec(f"r{r}", *[(l, POS, ["v"]) for l in rng.sample(labels, rng.randint(0, 3))])
                p = rec(f"r{r}", *[(l, POS, ["v"]) for l in rng.sample(labels, rng.randint(0, 3))])
                pairs.append(pair(g, p))
            for mode in ("micro", "macro"):
                precision, recall, f1 = topic_prf(pairs, mode)
                assert f1 <= max(precision, recall) + 1e-12

    def test_mismatched_ids_rejected(self):
        with pytest.raises(ValueError):
            pair(rec("r1"), rec("r2"))

    def test_pair_records_aligns_missing_sides(self):
        pairs = pair_records([rec("r1", ("a", POS, ["v"]))], [rec("r2", ("b", POS, ["v"]))])
        by_id = {p.gold.review.id: p for p in pairs}
        assert by_id["r1"].predicted.insights == ()
        assert by_id["r2"].gold.insights == ()


class TestVerbatimScores:
    def test_identical_records_perfect(self, provider, cache):
        g = rec("r1", ("a", POS, ["the zipper sticks", "seam ripped"]))
        assert verbatim_scores([pair(g, g)], provider, cache) == (1.0, 1.0)

    def test_half_of_gold_unpredicted(self, provider, cache):
        g = rec("r1", ("a", POS, ["verbatim one alpha", "verbatim two beta",
                                  "wholly different gamma", "anything else delta"]))
        p = rec("r1", ("a", POS, ["verbatim one alpha", "verbatim two beta"]))
        correctness, completeness = verbatim_scores([pair(g, p)], provider, cache)
        assert correctness == 1.0
        assert completeness == 0.5

    def test_one_spurious_prediction_among_four(self, provider, cache):
        gold_verbs = ["alpha one", "beta two", "gamma three", "delta four"]
        g = rec("r1", ("a", POS, gold_verbs))
        p = rec("r1", ("a", POS, gold_verbs + ["utterly unrelated zeta"]))
        correctness, completeness = verbatim_scores([pair(g, p)], provider, cache)
        assert correctness == pytest.approx(0.8)
        assert completeness == 1.0

    def test_substring_coincidence_counts(self, provider, cache):
        g = rec("r1", ("a", POS, ["the zipper sticks badly"]))
        p = rec("r1", ("a", POS, ["zipper sticks"]))
        correctness, completeness = verbatim_scores([pair(g, p)], provider, cache)
        assert correctness == 1.0 and completeness == 1.0

    def test_label_isolation(self, provider, cache):
        # same verbatim under a different label never matches
        g = rec("r1", ("a", POS, ["identical words here"]))
        p = rec("r1", ("b", POS, ["identical words here"]))
        correctness, completeness = verbatim_scores([pair(g, p)], provider, cache)
        assert correctness == 0.0 and completeness == 0.0

    def test_report_carries_floor_and_formula_inputs(self, provider, cache):
        g = rec("r1", ("a", POS, ["v one two"]))
        report = build_metric_report([pair(g, g)], provider, cache, sim_floor=0.75)
        assert report.sim_floor == 0.75
        assert report.f1 == 1.0
        d = report.to_dict()
        assert d["per_topic"]["a/positive"]["tp"] == 1

    def test_f1_identity_in_report(self, provider, cache):
        g = rec("r1", ("a", POS, ["v"]), ("b", POS, ["v"]))
        p = rec("r1", ("a", POS, ["v"]), ("c", POS, ["v"]))
        report = build_metric_report([pair(g, p)], provider, cache)
        expected = 2 * report.precision * report.recall / (report.precision + report.recall)
        assert report.f1 == pytest.approx(expected)


class TestTopicDistribution:
    def test_uniform_coverage_matches_share(self):
        records = [
            rec(f"r{i}", (f"topic {i % 100}", POS, ["v"])) for i in range(2000)
        ]
        curve = topic_distribution(records)
        assert len(curve.labels) == 100
        assert curve.coverage_at[12] == pytest.approx(0.12)
        assert curve.coverage_at[50] == pytest.approx(0.50)

    def test_single_topic_corpus(self):
        records = [rec(f"r{i}", ("only topic", POS, ["v"])) for i in range(10)]
        curve = topic_distribution(records)
        assert all(v == 1.0 for v in curve.coverage_at.values())

    def test_curve_monotone_and_ends_at_one(self):
        rng = random.Random(11)
        records = []
        for i in range(500):
            topic = f"t{rng.randint(0, 30)}"
            records.append(rec(f"r{i}", (topic, POS, ["v"])))
        curve = topic_distribution(records)
        assert list(curve.cumulative) == sorted(curve.cumulative)
        assert curve.cumulative[-1] == pytest.approx(1.0)
        assert list(curve.supports) == sorted(curve.supports, reverse=True)

    def test_zipf_corpus_is_heavy_tailed(self):
        rng = np.random.default_rng(12)
        n_topics = 100
        weights = 1.0 / np.arange(1, n_topics + 1) ** 1.2
        probs = weights / weights.sum()
        draws = rng.choice(n_topics, size=20000, p=probs)
        records = [
            rec(f"r{i}", (f"topic {d}", POS, ["v"])) for i, d in enumerate(draws)
        ]
        curve = topic_distribution(records)
        # the head dominates: a small slice of topics covers most mentions
        assert curve.coverage_at[12] > 0.6

    def test_empty_records(self):
        curve = topic_distribution([])
        assert curve.labels == ()
        assert curve.coverage_at[12] == 0.0
