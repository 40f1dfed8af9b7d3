"""Batch command-line interface: one subcommand per pipeline stage.

Exit codes: 0 success, 1 configuration/validation error, 2 data error.
Errors are emitted as one JSON object on stderr; progress logs are JSON
lines on stderr with per-stage counts so pipeline attrition is auditable.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Optional, Sequence, TypeVar

from . import jsonl
from .adapter import CountingModel, ExecAdapter, RawBundle, rule_based_adapter, run_inference
from .config import PipelineConfig, _build_section, load_config, provider_from_spec
from .datagen import (
    PromptTemplates,
    Providers,
    StageCounts,
    label_review_with_counts,
    serialize_training_pairs,
    shuffle_augment,
)
from .embedding import EmbeddingCache
from .errors import ConfigError, DataError
from .evaluation import build_metric_report, pair_records, topic_distribution, topic_prf
from .matching import match_topic
from .model import LabelledRecord, Polarity, Review, Segment, Taxonomy, validate_taxonomy
from .postprocess import apply_postprocessing, insight_rows
from .segmentation import segment_review
from .sentiment import SentimentClassifier, classify_segment, lexicon_classifier, precomputed_sentiment
from .taxonomy import (
    Cluster,
    ReviewFile,
    clean_taxonomy,
    export_review_file,
    fast_cluster,
    import_review_file,
    taxonomy_quality_report,
)

T = TypeVar("T")
U = TypeVar("U")


def _log(**fields) -> None:
    print(json.dumps(fields), file=sys.stderr)


def _emit_error(kind: str, exc: Exception) -> None:
    print(json.dumps({"error": {"type": kind, "message": str(exc)}}), file=sys.stderr)


def _parallel_map(fn: Callable[[T], U], items: Sequence[T], jobs: int) -> list[U]:
    """Order-preserving map; output order is input order regardless of jobs."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _load_reviews(path: str) -> list[Review]:
    reviews = []
    for row_no, row in enumerate(jsonl.read_jsonl(path), start=1):
        try:
            reviews.append(Review.from_dict(row))
        except (KeyError, TypeError) as exc:
            raise DataError(f"{path}:{row_no}: bad review row: {exc}") from exc
    return reviews


def _load_segments(path: str) -> list[Segment]:
    segments = []
    for row_no, row in enumerate(jsonl.read_jsonl(path), start=1):
        try:
            segments.append(Segment.from_dict(row))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}:{row_no}: bad segment row: {exc}") from exc
    return segments


def _load_records(path: str) -> list[LabelledRecord]:
    records = []
    for row_no, row in enumerate(jsonl.read_jsonl(path), start=1):
        try:
            records.append(LabelledRecord.from_dict(row))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}:{row_no}: bad record row: {exc}") from exc
    return records


def _load_taxonomy(path: str, require_valid: bool = False) -> Taxonomy:
    taxonomy = Taxonomy.from_dict(jsonl.read_json(path))
    if require_valid:
        violations = validate_taxonomy(taxonomy)
        if violations:
            raise DataError(f"taxonomy {path} is invalid: " + "; ".join(violations))
    return taxonomy


def _classifier(args) -> SentimentClassifier:
    lexicon = getattr(args, "lexicon", None)
    scores = getattr(args, "scores", None)
    if (lexicon is None) == (scores is None):
        raise ConfigError("exactly one of --lexicon or --scores is required")
    return lexicon_classifier(lexicon) if lexicon else precomputed_sentiment(scores)


def _cfg(args) -> PipelineConfig:
    cfg = load_config(getattr(args, "config", None))
    replacements = {}
    if getattr(args, "seed", None) is not None:
        replacements["seed"] = args.seed
    if getattr(args, "augment", None) is not None:
        replacements["augment"] = args.augment
    if getattr(args, "embedder", None):
        replacements["embedder"] = args.embedder
    if getattr(args, "sim_floor", None) is not None:
        replacements["verbatim_sim_floor"] = args.sim_floor
    if getattr(args, "delta_p", None) is not None:
        replacements["sentiment"] = dataclasses.replace(cfg.sentiment, delta_p=args.delta_p)
    if getattr(args, "templates", None):
        replacements["templates"] = _build_section(
            "templates", PromptTemplates, jsonl.read_json(args.templates)
        )
    return dataclasses.replace(cfg, **replacements) if replacements else cfg


def _providers(cfg: PipelineConfig, args, classifier: Optional[SentimentClassifier] = None) -> Providers:
    provider = provider_from_spec(cfg.embedder, getattr(args, "embeddings", None))
    return Providers(embedder=provider, sentiment=classifier, cache=EmbeddingCache())


def _record_seed(seed: int, review_id: str) -> int:
    # scheduling-independent per-record seed so --jobs never changes output
    return seed ^ zlib.crc32(review_id.encode("utf-8"))


def _pairs_rows(records: Iterable[LabelledRecord], cfg: PipelineConfig) -> list[dict]:
    rows = []
    for record in records:
        expanded = [record]
        if cfg.augment > 0:
            expanded.extend(
                shuffle_augment(record, cfg.augment, _record_seed(cfg.seed, record.review.id))
            )
        for rec in expanded:
            rows.extend(p.to_dict() for p in serialize_training_pairs(rec, cfg.templates))
    return rows


# ---------------------------------------------------------------- commands


def cmd_segment(args) -> None:
    cfg = _cfg(args)
    reviews = _load_reviews(args.infile)
    rows = []
    for review in reviews:
        rows.extend(s.to_dict() for s in segment_review(review, cfg.segmenter))
    jsonl.write_jsonl(args.out, rows)
    _log(stage="segment", reviews=len(reviews), segments=len(rows), out=args.out)


def cmd_sentiment(args) -> None:
    cfg = _cfg(args)
    classifier = _classifier(args)
    segments = _load_segments(args.infile)
    scored = [classify_segment(s, classifier, cfg.sentiment) for s in segments]
    jsonl.write_jsonl(args.out, (s.to_dict() for s in scored))
    neutral = sum(1 for s in scored if s.polarity is Polarity.NEUTRAL)
    _log(stage="sentiment", segments=len(scored), neutral=neutral, out=args.out)


def cmd_match(args) -> None:
    cfg = _cfg(args)
    taxonomy = _load_taxonomy(args.taxonomy, require_valid=True)
    provider = provider_from_spec(cfg.embedder, getattr(args, "embeddings", None))
    cache = EmbeddingCache()
    segments = _load_segments(args.segments)
    polarized = [s for s in segments if s.polarity in (Polarity.POSITIVE, Polarity.NEGATIVE)]
    rows = []
    matched = 0
    for seg in polarized:
        outcome = match_topic(seg, taxonomy, cfg.match, provider, cache)
        matched += outcome.matched is not None
        rows.append({"segment": seg.to_dict(), "outcome": outcome.to_dict()})
    jsonl.write_jsonl(args.out, rows)
    _log(
        stage="match",
        segments=len(segments),
        neutral_dropped=len(segments) - len(polarized),
        matched=matched,
        nomatch=len(polarized) - matched,
        out=args.out,
    )


def cmd_build_taxonomy(args) -> None:
    cfg = _cfg(args)
    action = args.action
    if action == "cluster":
        provider = provider_from_spec(cfg.embedder, getattr(args, "embeddings", None))
        cache = EmbeddingCache()
        segments = _load_segments(args.segments)
        clusters: list[Cluster] = []
        for polarity in (Polarity.POSITIVE, Polarity.NEGATIVE):
            subset = [s for s in segments if s.polarity is polarity]
            clusters.extend(fast_cluster(subset, polarity, cfg.cluster, provider, cache))
        jsonl.write_json(args.out, {"clusters": [c.to_dict() for c in clusters]})
        clustered = sum(len(c.members) for c in clusters)
        _log(stage="cluster", segments=len(segments), clusters=len(clusters), clustered=clustered)
    elif action == "export":
        doc = jsonl.read_json(args.clusters)
        clusters = [Cluster.from_dict(c) for c in doc.get("clusters", ())]
        jsonl.write_json(args.out, export_review_file(clusters).to_dict())
        _log(stage="export", clusters=len(clusters), out=args.out)
    elif action == "import":
        review_file = ReviewFile.from_dict(jsonl.read_json(args.review_file))
        taxonomy = import_review_file(review_file)
        jsonl.write_json(args.out, taxonomy.to_dict())
        _log(stage="import", topics=len(taxonomy.topics), out=args.out)
    elif action == "clean":
        provider = provider_from_spec(cfg.embedder, getattr(args, "embeddings", None))
        taxonomy = _load_taxonomy(args.taxonomy)
        cleaned = clean_taxonomy(taxonomy, cfg.clean, provider, EmbeddingCache())
        jsonl.write_json(args.out, cleaned.to_dict())
        before = sum(len(t.keywords) for t in taxonomy.topics)
        after = sum(len(t.keywords) for t in cleaned.topics)
        _log(stage="clean", topics=len(cleaned.topics), keywords_before=before, keywords_after=after)
    elif action == "report":
        provider = provider_from_spec(cfg.embedder, getattr(args, "embeddings", None))
        taxonomy = _load_taxonomy(args.taxonomy)
        report = taxonomy_quality_report(taxonomy, provider, EmbeddingCache(), cfg.clean)
        jsonl.write_json(args.out, report.to_dict())
        _log(stage="report", exclusivity=report.exclusivity, out=args.out)
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigError(f"unknown build-taxonomy action {action!r}")


def _run_labelling(args, cfg: PipelineConfig, taxonomy: Taxonomy):
    providers = _providers(cfg, args, _classifier(args))
    reviews = _load_reviews(args.reviews)
    results = _parallel_map(
        lambda r: label_review_with_counts(
            r, taxonomy, cfg.segmenter, cfg.sentiment, cfg.match, providers
        ),
        reviews,
        args.jobs,
    )
    records = [record for record, _ in results]
    totals = StageCounts()
    for _, counts in results:
        totals = totals + counts
    return records, totals


def cmd_generate_data(args) -> None:
    cfg = _cfg(args)
    taxonomy = _load_taxonomy(args.taxonomy, require_valid=True)
    records, totals = _run_labelling(args, cfg, taxonomy)
    pairs = _pairs_rows(records, cfg)
    jsonl.write_jsonl(args.out, pairs)
    if args.records_out:
        jsonl.write_jsonl(args.records_out, (r.to_dict() for r in records))
    _log(
        stage="generate-data",
        reviews=len(records),
        segments=totals.segments,
        neutral_dropped=totals.neutral_dropped,
        nomatch_dropped=totals.nomatch_dropped,
        pairs=len(pairs),
        out=args.out,
    )


def cmd_infer(args) -> None:
    cfg = _cfg(args)
    reviews = _load_reviews(args.reviews)
    if args.adapter == "rule":
        if not args.taxonomy:
            raise ConfigError("--taxonomy is required with --adapter rule")
        taxonomy = _load_taxonomy(args.taxonomy, require_valid=True)
        providers = _providers(cfg, args, _classifier(args))
        model = CountingModel(
            rule_based_adapter(
                taxonomy, cfg.segmenter, cfg.sentiment, cfg.match, providers, cfg.templates
            )
        )
        bundles = _parallel_map(
            lambda r: run_inference(r, model, cfg.templates), reviews, args.jobs
        )
    elif args.adapter.startswith("exec:"):
        with ExecAdapter(args.adapter[len("exec:"):]) as inner:
            model = CountingModel(inner)
            bundles = [run_inference(r, model, cfg.templates) for r in reviews]
    else:
        raise ConfigError(f"--adapter must be 'rule' or 'exec:<command>', got {args.adapter!r}")
    jsonl.write_jsonl(args.out, (b.to_dict() for b in bundles))
    _log(
        stage="infer",
        reviews=len(reviews),
        prompts=model.calls,
        insights=sum(len(b.items) for b in bundles),
        warnings=sum(len(b.warnings) for b in bundles),
        out=args.out,
    )


def cmd_postprocess(args) -> None:
    cfg = _cfg(args)
    taxonomy = _load_taxonomy(args.taxonomy)
    provider = provider_from_spec(cfg.embedder, getattr(args, "embeddings", None))
    bundles = [RawBundle.from_dict(row) for row in jsonl.read_jsonl(args.bundles)]
    result = apply_postprocessing(bundles, taxonomy, cfg.post, provider, EmbeddingCache())
    jsonl.write_jsonl(args.out, insight_rows(result, taxonomy))
    jsonl.write_json(args.delta, result.delta.to_dict())
    _log(
        stage="postprocess",
        bundles=len(bundles),
        insights=len(result.insights),
        proposed_l4=len(result.delta.proposed_l4),
        proposed_l3=len(result.delta.proposed_l3),
        out=args.out,
    )


def cmd_evaluate(args) -> None:
    cfg = _cfg(args)
    provider = provider_from_spec(cfg.embedder, getattr(args, "embeddings", None))
    cache = EmbeddingCache()
    pairs = pair_records(_load_records(args.gold), _load_records(args.pred))
    micro = build_metric_report(pairs, provider, cache, cfg.verbatim_sim_floor, mode="micro")
    macro_p, macro_r, macro_f1 = topic_prf(pairs, mode="macro")
    report = {
        "micro": {"precision": micro.precision, "recall": micro.recall, "f1": micro.f1},
        "macro": {"precision": macro_p, "recall": macro_r, "f1": macro_f1},
        "correctness": micro.correctness,
        "completeness": micro.completeness,
        "sim_floor": cfg.verbatim_sim_floor,
        "per_topic": micro.per_topic,
        "config": cfg.to_dict(),
    }
    jsonl.write_json(args.report, report)
    _log(stage="evaluate", pairs=len(pairs), micro_f1=micro.f1, macro_f1=macro_f1)


def cmd_stats(args) -> None:
    records = _load_records(args.records)
    curve = topic_distribution(records)
    jsonl.write_json(args.out, curve.to_dict())
    _log(stage="stats", records=len(records), topics=len(curve.labels), out=args.out)


def cmd_pipeline(args) -> None:
    cfg = _cfg(args)
    taxonomy = _load_taxonomy(args.taxonomy, require_valid=True)
    records, totals = _run_labelling(args, cfg, taxonomy)
    jsonl.write_jsonl(args.out, (r.to_dict() for r in records))
    if args.pairs_out:
        jsonl.write_jsonl(args.pairs_out, _pairs_rows(records, cfg))
    _log(
        stage="pipeline",
        reviews=len(records),
        segments=totals.segments,
        neutral_dropped=totals.neutral_dropped,
        nomatch_dropped=totals.nomatch_dropped,
        records=len(records),
        out=args.out,
    )


# ---------------------------------------------------------------- parser


def _add_common(p: argparse.ArgumentParser, *, embed=False, classify=False, jobs=False, seed=False):
    p.add_argument("--config", help="pipeline config JSON")
    if embed:
        p.add_argument("--embedder", help="builtin:<dim>:<seed>")
        p.add_argument("--embeddings", help="precomputed embeddings JSONL")
    if classify:
        p.add_argument("--lexicon", help="sentiment lexicon JSONL")
        p.add_argument("--scores", help="precomputed sentiment scores JSONL")
    if jobs:
        p.add_argument("--jobs", type=int, default=1, help="worker threads (default 1)")
    if seed:
        p.add_argument("--seed", type=int, help="override config seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reviewlens",
        description="Structured insight mining from customer reviews.",
    )
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("segment", help="split reviews into candidate phrases")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(handler=cmd_segment)

    p = sub.add_parser("sentiment", help="score segments and assign polarity")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--delta-p", dest="delta_p", type=float, help="neutrality threshold")
    _add_common(p, classify=True)
    p.set_defaults(handler=cmd_sentiment)

    p = sub.add_parser("match", help="assign taxonomy topics to polarized segments")
    p.add_argument("--segments", required=True)
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--out", required=True)
    _add_common(p, embed=True)
    p.set_defaults(handler=cmd_match)

    p = sub.add_parser("build-taxonomy", help="cluster, review-file round trip, clean, report")
    p.add_argument("action", choices=["cluster", "export", "import", "clean", "report"])
    p.add_argument("--segments")
    p.add_argument("--clusters")
    p.add_argument("--review-file", dest="review_file")
    p.add_argument("--taxonomy")
    p.add_argument("--out", required=True)
    _add_common(p, embed=True)
    p.set_defaults(handler=cmd_build_taxonomy)

    p = sub.add_parser("generate-data", help="labelled records and 2N+1 training pairs")
    p.add_argument("--reviews", required=True)
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--out", required=True, help="training pairs JSONL")
    p.add_argument("--records-out", dest="records_out", help="labelled records JSONL")
    p.add_argument("--templates", help="prompt templates JSON")
    p.add_argument("--augment", type=int, help="max shuffled variants per record")
    _add_common(p, embed=True, classify=True, jobs=True, seed=True)
    p.set_defaults(handler=cmd_generate_data)

    p = sub.add_parser("infer", help="run the decomposed prompting loop")
    p.add_argument("--reviews", required=True)
    p.add_argument("--adapter", required=True, help="rule | exec:<command>")
    p.add_argument("--taxonomy", help="required for the rule adapter")
    p.add_argument("--templates", help="prompt templates JSON")
    p.add_argument("--out", required=True)
    _add_common(p, embed=True, classify=True, jobs=True)
    p.set_defaults(handler=cmd_infer)

    p = sub.add_parser("postprocess", help="reconcile generated topics with the taxonomy")
    p.add_argument("--bundles", required=True)
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--out", required=True, help="hierarchical insights JSONL")
    p.add_argument("--delta", required=True, help="proposed taxonomy delta JSON")
    _add_common(p, embed=True)
    p.set_defaults(handler=cmd_postprocess)

    p = sub.add_parser("evaluate", help="multi-label metrics against gold records")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--sim-floor", dest="sim_floor", type=float)
    _add_common(p, embed=True)
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("stats", help="topic distribution and coverage curve")
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(handler=cmd_stats)

    p = sub.add_parser("pipeline", help="segment -> sentiment -> match -> records/pairs")
    p.add_argument("--reviews", required=True)
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--out", required=True, help="labelled records JSONL")
    p.add_argument("--pairs-out", dest="pairs_out", help="training pairs JSONL")
    p.add_argument("--templates", help="prompt templates JSON")
    p.add_argument("--augment", type=int)
    _add_common(p, embed=True, classify=True, jobs=True, seed=True)
    p.set_defaults(handler=cmd_pipeline)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "handler"):
        parser.print_help(file=sys.stderr)
        return 1
    try:
        args.handler(args)
    except ConfigError as exc:
        _emit_error("config", exc)
        return 1
    except DataError as exc:
        _emit_error("data", exc)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
