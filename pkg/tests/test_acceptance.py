"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion
lines; every tolerance and time bound is pinned here.
"""

import random
import time

import numpy as np
import pytest

from reviewlens import jsonl
from reviewlens.adapter import CountingModel, run_inference, rule_based_adapter
from reviewlens.cli import main
from reviewlens.datagen import generate_labelled, serialize_training_pairs
from reviewlens.embedding import EmbeddingCache, builtin_deterministic_provider, sim_st
from reviewlens.evaluation import pair_records, topic_distribution, topic_prf
from reviewlens.matching import MatchConfig, MatchRule, best_topic_and_score, resolve_cascade
from reviewlens.model import Insight, LabelledRecord, Provenance, Review
from reviewlens.postprocess import PostConfig, PostOutcome, apply_postprocessing, route_generated_topic
from reviewlens.segmentation import SegmenterConfig, segment_review
from reviewlens.taxonomy import CleanConfig, inter_cluster_clean, intra_cluster_clean

from conftest import DEFAULT_CFGS, JACKET_SEGMENTS, POS, make_topic
from matching_oracle import DECISION_TABLE, oracle_match_from_scores


def _report(n, text):
    print(f"\nACCEPTANCE {n} PASS: {text}")


def test_acceptance_1_segmentation_golden(review_image, review_jacket):
    cfg = SegmenterConfig()
    start = time.perf_counter()
    image_segments = [s.text for s in segment_review(review_image, cfg)]
    jacket_segments = [s.text for s in segment_review(review_jacket, cfg)]
    elapsed = time.perf_counter() - start
    assert image_segments == [
        "Not even close",
        "not even close to the same as the image",
    ]
    # segment texts follow the source review text exactly
    assert jacket_segments == JACKET_SEGMENTS
    assert elapsed < 1.0
    _report(1, f"golden segment sets reproduced in {elapsed * 1000:.1f} ms")


def test_acceptance_2_decision_table():
    topics = [
        make_topic("alpha grip", POS, "h", "c", ["kw"], id="A"),
        make_topic("beta strap", POS, "h", "c", ["kw"], id="B"),
        make_topic("gamma seam", POS, "h", "c", ["kw"], id="C"),
    ]
    cfg = MatchConfig()
    start = time.perf_counter()
    rules_seen = set()
    for rule_name, name_scores, tkw_scores, mkw_scores, expected_id in DECISION_TABLE:
        name_sig = best_topic_and_score(topics, name_scores)
        tkw_sig = best_topic_and_score(topics, tkw_scores)
        mkw_sig = best_topic_and_score(topics, mkw_scores)
        sums = [
            (name_scores[i] + tkw_scores[i] + mkw_scores[i]) / 3.0 for i in range(len(topics))
        ]
        avg_sig = best_topic_and_score(topics, sums)
        matched, rule = resolve_cascade(name_sig, tkw_sig, mkw_sig, avg_sig, cfg)
        oracle_topic, oracle_rule = oracle_match_from_scores(
            topics, name_scores, tkw_scores, mkw_scores, cfg
        )
        assert rule.value == rule_name == oracle_rule
        assert (matched.id if matched else None) == expected_id == (
            oracle_topic.id if oracle_topic else None
        )
        rules_seen.add(rule)
    elapsed = time.perf_counter() - start
    assert rules_seen == set(MatchRule), "every cascade branch must be exercised"
    assert elapsed < 1.0
    _report(2, f"8/8 cascade rules agree with the straight-line oracle in {elapsed * 1000:.1f} ms")


def _keyword_pool(rng):
    stems = ["zipper", "strap", "seam", "battery", "motor", "filter", "screen", "sole",
             "collar", "buckle", "cord", "nozzle"]
    moods = ["sticks", "broke", "faded", "ripped", "works", "rattles", "leaks", "shines"]
    pool = []
    for s in stems:
        for m in moods:
            pool.append(f"{s} {m} often")
            pool.append(f"{s} {m} often here")  # planted near-duplicates
    rng.shuffle(pool)
    return pool


def test_acceptance_3_cleaning_postconditions(provider):
    rng = random.Random(1234)
    pool = _keyword_pool(rng)
    cache = EmbeddingCache()
    cfg = CleanConfig()

    def unit(text):
        return cache.get(text, provider)

    start = time.perf_counter()
    for trial in range(60):
        keywords = [rng.choice(pool) for _ in range(rng.randint(0, 200))]
        survivors = intra_cluster_clean(keywords, cfg, provider, cache)
        if survivors:
            vectors = np.stack([unit(k) for k in survivors])
            sims = vectors @ vectors.T
            np.fill_diagonal(sims, 0.0)
            assert sims.max(initial=0.0) <= cfg.delta_intra + 1e-12, f"intra trial {trial}"

    for trial in range(40):
        topics = {
            f"t{g}": [rng.choice(pool) for _ in range(rng.randint(0, 50))]
            for g in range(rng.randint(2, 5))
        }
        cleaned = inter_cluster_clean(topics, cfg, provider, cache)
        again = inter_cluster_clean(cleaned, cfg, provider, cache)
        assert again == cleaned, "inter_cluster_clean must be idempotent"
        flat = [(g, k) for g, kws in cleaned.items() for k in kws]
        if flat:
            vectors = np.stack([unit(k) for _, k in flat])
            groups = np.array([hash(g) for g, _ in flat])
            sims = vectors @ vectors.T
            cross = groups[:, None] != groups[None, :]
            worst = (sims * cross).max(initial=0.0)
            assert worst <= cfg.delta_e + 1e-12, f"inter trial {trial}"
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0
    _report(3, f"100 randomized cleaning runs hold both post-conditions in {elapsed:.1f} s")


def test_acceptance_4_postprocess_routing_boundaries():
    cfg = PostConfig()
    assert route_generated_topic(0.951, 0.0, cfg) is PostOutcome.REPLACED_SEMANTIC
    assert route_generated_topic(0.95, 0.5, cfg) is PostOutcome.SURFACED_L4
    assert route_generated_topic(0.949, 0.5, cfg) is PostOutcome.SURFACED_L4
    assert route_generated_topic(0.95, 0.0, cfg) is PostOutcome.SURFACED_NEW_L3

    for score_t in (0.699, 0.7, 0.701):
        for score_v in (0.399, 0.4, 0.401):
            expected = (
                PostOutcome.SURFACED_L4
                if (score_t > 0.7 and score_v > 0.4)
                else PostOutcome.SURFACED_NEW_L3
            )
            assert route_generated_topic(score_t, score_v, cfg) is expected
    _report(4, "strict > comparisons verified at 0.95 and the (0.7, 0.4) grid")


def test_acceptance_5_closed_loop(planted_world, provider):
    start = time.perf_counter()
    seg_cfg, sent_cfg, match_cfg = DEFAULT_CFGS
    providers = planted_world.providers(provider)
    gold = generate_labelled(
        planted_world.reviews, planted_world.taxonomy, seg_cfg, sent_cfg, match_cfg, providers
    )

    adapter = rule_based_adapter(
        planted_world.taxonomy, seg_cfg, sent_cfg, match_cfg, providers
    )
    bundles = [run_inference(r, adapter) for r in planted_world.reviews]
    result = apply_postprocessing(
        bundles, planted_world.taxonomy, PostConfig(), provider, providers.cache
    )
    by_review: dict[str, list[Insight]] = {r.review.id: [] for r in gold}
    for routed in result.routed:
        if routed.insight is not None:
            by_review[routed.review_id].append(routed.insight)
    reviews_by_id = {r.id: r for r in planted_world.reviews}
    predicted = [
        LabelledRecord(review=reviews_by_id[rid], insights=tuple(insights))
        for rid, insights in by_review.items()
    ]

    pairs = pair_records(gold, predicted)
    precision, recall, f1 = topic_prf(pairs, mode="micro")
    elapsed = time.perf_counter() - start
    assert f1 >= 0.99, f"closed loop must reproduce the labelled records, got F1={f1}"
    assert elapsed < 60.0
    # sanity: the corpus is not degenerate
    assert sum(len(r.insights) for r in gold) > 500
    _report(5, f"closed-loop micro-F1 = {f1:.4f} over 500 reviews in {elapsed:.1f} s")


def test_acceptance_6_prompt_accounting():
    rng = random.Random(555)
    checked = 0
    for trial in range(1000):
        n = rng.randint(0, 8)
        topics = [
            make_topic(f"aspect {trial} {i}", POS, "h", "c", ["kw"], id=f"t{trial}-{i}")
            for i in range(n)
        ]
        record = LabelledRecord(
            review=Review(id=f"r{trial}", text=f"review body {trial}"),
            insights=tuple(
                Insight(topic=t, polarity=POS, verbatims=(f"v {t.id}",),
                        provenance=Provenance.MATCHED)
                for t in topics
            ),
        )
        pairs = serialize_training_pairs(record)
        assert len(pairs) == 2 * n + 1

        class Replay:
            def __init__(self, mapping):
                self.mapping = mapping

            def generate(self, prompt):
                return self.mapping[prompt]

        model = CountingModel(Replay({p.prompt: p.target for p in pairs}))
        bundle = run_inference(record.review, model)
        assert model.calls == 2 * n + 1
        assert len(bundle.items) == n
        checked += 1
    assert checked == 1000
    _report(6, "2N+1 pair and prompt counts hold on 1000 randomized records, N in [0, 8]")


def test_acceptance_7_heavy_tail_statistics():
    def corpus(draws):
        return [
            LabelledRecord(
                review=Review(id=f"r{i}", text="t"),
                insights=(
                    Insight(topic=f"topic {d}", polarity=POS, verbatims=("v",),
                            provenance=Provenance.GENERATED_EXISTING),
                ),
            )
            for i, d in enumerate(draws)
        ]

    n_topics = 100
    rng = np.random.default_rng(42)
    weights = 1.0 / np.arange(1, n_topics + 1) ** 1.2
    zipf_draws = rng.choice(n_topics, size=20000, p=weights / weights.sum())
    uniform_draws = np.arange(20000) % n_topics

    zipf_curve = topic_distribution(corpus(zipf_draws))
    uniform_curve = topic_distribution(corpus(uniform_draws))

    for curve in (zipf_curve, uniform_curve):
        cumulative = list(curve.cumulative)
        assert cumulative == sorted(cumulative), "coverage must be monotone"
        assert cumulative[-1] == pytest.approx(1.0)

    ratio = zipf_curve.coverage_at[12] / uniform_curve.coverage_at[12]
    assert ratio >= 3.0, f"heavy tail ratio {ratio:.2f}"
    _report(
        7,
        f"coverage@12%: zipf {zipf_curve.coverage_at[12]:.3f} vs uniform "
        f"{uniform_curve.coverage_at[12]:.3f} (ratio {ratio:.1f})",
    )


def test_acceptance_8_pipeline_determinism(tmp_path, planted_world):
    reviews = tmp_path / "reviews.jsonl"
    taxonomy = tmp_path / "taxonomy.json"
    lexicon = tmp_path / "lexicon.jsonl"
    jsonl.write_jsonl(reviews, (r.to_dict() for r in planted_world.reviews[:120]))
    jsonl.write_json(taxonomy, planted_world.taxonomy.to_dict())
    jsonl.write_jsonl(
        lexicon,
        [{"token": "great", "weight": 2.0}, {"token": "terrible", "weight": -2.0}],
    )

    def run(tag, jobs):
        records = tmp_path / f"records-{tag}.jsonl"
        pairs = tmp_path / f"pairs-{tag}.jsonl"
        code = main([
            "pipeline", "--reviews", str(reviews), "--taxonomy", str(taxonomy),
            "--out", str(records), "--pairs-out", str(pairs),
            "--lexicon", str(lexicon), "--seed", "17", "--augment", "3",
            "--jobs", str(jobs),
        ])
        assert code == 0
        return records.read_bytes(), pairs.read_bytes()

    first = run("one", 1)
    second = run("two", 1)
    parallel = run("par", 8)
    assert first == second, "same seed must be byte-identical"
    assert first == parallel, "--jobs must not change output"
    _report(8, "pipeline byte-identical across reruns and --jobs 1 vs 8")


def test_acceptance_9_simst_properties():
    provider = builtin_deterministic_provider(dim=128, seed=2)
    cache = EmbeddingCache()
    rng = random.Random(2024)
    words = ["size", "small", "zip", "strap", "fast", "slow", "great", "poor",
             "soft", "rough", "fit", "loose", "warm", "cold", "broke", "works"]

    def text():
        return " ".join(rng.choice(words) for _ in range(rng.randint(1, 6)))

    checked = 0
    for _ in range(10000):
        a, b = text(), text()
        s_ab = sim_st(a, b, provider, cache)
        s_ba = sim_st(b, a, provider, cache)
        assert s_ab == s_ba, "cosine must be symmetric"
        assert -1.0 - 1e-9 <= s_ab <= 1.0 + 1e-9
        checked += 1
    for _ in range(200):
        t = text()
        assert sim_st(t, t, provider, cache) == pytest.approx(1.0, abs=1e-9)
    assert checked == 10000
    _report(9, "symmetry, range and self-similarity hold on 10000 random pairs")
