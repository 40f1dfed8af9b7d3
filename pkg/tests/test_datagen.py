import pytest

from reviewlens.datagen import (
    Phase,
    PromptTemplates,
    TrainingPair,
    format_topic_list,
    generate_labelled,
    label_review,
    parse_topic_list,
    serialize_training_pairs,
    shuffle_augment,
)
from reviewlens.errors import ConfigError
from reviewlens.model import Insight, LabelledRecord, Provenance, Review
from reviewlens.segmentation import segment_review

from conftest import DEFAULT_CFGS, JACKET_INSIGHTS, POS, make_topic


def _record(n_insights, review_text="Solid product. Works well."):
    topics = [
        make_topic(f"aspect {chr(97 + i)}", POS, "h", "c", ["kw"], id=f"t{i}")
        for i in range(n_insights)
    ]
    insights = tuple(
        Insight(topic=t, polarity=POS, verbatims=(f"verbatim {t.id}", f"more {t.id}"),
                provenance=Provenance.MATCHED)
        for t in topics
    )
    return LabelledRecord(review=Review(id="r", text=review_text), insights=insights)


class TestGenerateLabelled:
    def test_paper_jacket_review(self, review_jacket, sample_taxonomy, sample_providers):
        seg_cfg, sent_cfg, match_cfg = DEFAULT_CFGS
        record = label_review(
            review_jacket, sample_taxonomy, seg_cfg, sent_cfg, match_cfg, sample_providers
        )
        got = [(i.topic_name, i.polarity.value, list(i.verbatims)) for i in record.insights]
        assert got == JACKET_INSIGHTS

    def test_paper_image_review(self, review_image, sample_taxonomy, sample_providers):
        # "Not even close" stays unmatched; the longer segment lands on
        # false advertising
        record = label_review(review_image, sample_taxonomy, *DEFAULT_CFGS, sample_providers)
        got = [(i.topic_name, i.polarity.value, list(i.verbatims)) for i in record.insights]
        assert got == [
            ("false advertising", "negative", ["not even close to the same as the image"]),
        ]

    def test_neutral_only_review_yields_empty_record(self, sample_taxonomy, sample_providers):
        review = Review(id="r", text="The box. The packaging tape.")
        record = label_review(review, sample_taxonomy, *DEFAULT_CFGS, sample_providers)
        assert record.insights == ()

    def test_same_topic_segments_group_into_one_insight(self, sample_taxonomy, sample_providers):
        review = Review(id="r", text="Color is GREAT. nice color is great here.")
        record = label_review(review, sample_taxonomy, *DEFAULT_CFGS, sample_providers)
        assert len(record.insights) == 1
        insight = record.insights[0]
        assert insight.topic_name == "color"
        assert insight.verbatims == ("Color is GREAT", "nice color is great here")

    def test_verbatims_are_segment_texts(self, review_jacket, sample_taxonomy, sample_providers):
        record = label_review(review_jacket, sample_taxonomy, *DEFAULT_CFGS, sample_providers)
        segment_texts = {s.text for s in segment_review(review_jacket, DEFAULT_CFGS[0])}
        for insight in record.insights:
            for v in insight.verbatims:
                assert v in segment_texts

    def test_generate_labelled_maps_all_reviews(
        self, review_image, review_jacket, sample_taxonomy, sample_providers
    ):
        records = generate_labelled(
            [review_image, review_jacket], sample_taxonomy, *DEFAULT_CFGS, sample_providers
        )
        assert [r.review.id for r in records] == [review_image.id, review_jacket.id]

    def test_matched_provenance_references_taxonomy(self, review_jacket, sample_taxonomy,
                                                    sample_providers):
        record = label_review(review_jacket, sample_taxonomy, *DEFAULT_CFGS, sample_providers)
        for insight in record.insights:
            assert insight.provenance is Provenance.MATCHED
            assert sample_taxonomy.get(insight.topic.id) is not None


class TestSerializeTrainingPairs:
    def test_three_insights_give_seven_pairs(self):
        pairs = serialize_training_pairs(_record(3))
        assert len(pairs) == 7
        assert [p.phase for p in pairs] == [
            Phase.TOPIC, Phase.POLARITY, Phase.POLARITY, Phase.POLARITY,
            Phase.VERBATIM, Phase.VERBATIM, Phase.VERBATIM,
        ]

    def test_pair_count_law(self):
        for n in range(0, 9):
            assert len(serialize_training_pairs(_record(n))) == 2 * n + 1

    def test_empty_record_yields_single_pair_with_empty_list(self):
        pairs = serialize_training_pairs(_record(0))
        assert len(pairs) == 1
        assert pairs[0].phase is Phase.TOPIC
        assert pairs[0].target == "[]"

    def test_topic_target_orders_by_first_occurrence(self, sample_taxonomy, sample_providers):
        # interleaved segments: color, warmth, color again
        review = Review(id="r", text="Color is GREAT. Warmth is there. nice color is great.")
        record = label_review(review, sample_taxonomy, *DEFAULT_CFGS, sample_providers)
        pairs = serialize_training_pairs(record)
        assert pairs[0].target == "[color, warmth]"

    def test_prompt_question_context_shape(self):
        pairs = serialize_training_pairs(_record(1))
        assert pairs[0].prompt.endswith(" : Solid product. Works well.")
        assert "<aspect a>" in pairs[1].prompt
        assert "<positive>" in pairs[2].prompt

    def test_verbatim_target_separator(self):
        pairs = serialize_training_pairs(_record(1))
        assert pairs[2].target == "verbatim t0 | more t0"

    def test_round_trip_parse(self):
        names, strict = parse_topic_list(format_topic_list(["color", "correct size"]))
        assert strict
        assert names == ["color", "correct size"]
        assert parse_topic_list("[]") == ([], True)

    def test_training_pair_serialization(self):
        pair = serialize_training_pairs(_record(1))[0]
        assert TrainingPair.from_dict(pair.to_dict()) == pair


class TestTemplates:
    def test_defaults_validate(self):
        PromptTemplates()

    def test_missing_slot_rejected(self):
        with pytest.raises(ConfigError, match="exactly once"):
            PromptTemplates(topic_q="no slot here")

    def test_duplicate_slot_rejected(self):
        with pytest.raises(ConfigError, match="exactly once"):
            PromptTemplates(topic_q="{review} and {review}")

    def test_unknown_slot_rejected(self):
        with pytest.raises(ConfigError, match="unknown slot"):
            PromptTemplates(topic_q="{review} {oops}")


class TestShuffleAugment:
    def test_single_sentence_review_has_no_variants(self):
        record = _record(1, review_text="Only one sentence here")
        assert shuffle_augment(record, max_variants=6, seed=1) == []

    def test_three_sentences_give_up_to_five_variants(self):
        record = _record(1, review_text="First bit. Second bit. Third bit.")
        variants = shuffle_augment(record, max_variants=6, seed=1)
        assert len(variants) == 5  # 3! - 1
        originals = tuple(p.strip() for p in record.review.text.split(".") if p.strip())
        seen = set()
        for v in variants:
            parts = tuple(p.strip() for p in v.review.text.split(".") if p.strip())
            assert sorted(parts) == sorted(originals)
            assert parts != originals
            seen.add(parts)
        assert len(seen) == 5

    def test_max_variants_cap(self):
        record = _record(1, review_text="A one. B two. C three. D four.")
        assert len(shuffle_augment(record, max_variants=6, seed=3)) == 6

    def test_seeded_runs_reproduce_byte_for_byte(self):
        record = _record(2, review_text="A one. B two. C three. D four. E five.")
        a = shuffle_augment(record, max_variants=6, seed=42)
        b = shuffle_augment(record, max_variants=6, seed=42)
        assert a == b
        c = shuffle_augment(record, max_variants=6, seed=43)
        assert a != c

    def test_labels_copied_unchanged(self):
        record = _record(3, review_text="A one. B two. C three.")
        for variant in shuffle_augment(record, max_variants=6, seed=5):
            assert variant.insights == record.insights
            assert variant.review.id.startswith("r#shuffle")

    def test_zero_variants(self):
        record = _record(1, review_text="A one. B two.")
        assert shuffle_augment(record, max_variants=0, seed=1) == []

    def test_verbatims_survive_shuffling(self, review_jacket, sample_taxonomy, sample_providers):
        record = label_review(review_jacket, sample_taxonomy, *DEFAULT_CFGS, sample_providers)
        for variant in shuffle_augment(record, max_variants=6, seed=9):
            for insight in variant.insights:
                for verbatim in insight.verbatims:
                    assert verbatim in variant.review.text

    def test_many_sentences_distinct(self):
        text = ". ".join(f"Sentence number {i} body" for i in range(9)) + "."
        record = _record(1, review_text=text)
        variants = shuffle_augment(record, max_variants=6, seed=11)
        assert len(variants) == 6
        texts = {v.review.text for v in variants}
        assert len(texts) == 6
        assert record.review.text not in texts
