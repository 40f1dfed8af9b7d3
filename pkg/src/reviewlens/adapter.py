"""Generative-model contract for inference plus two concrete adapters.

The rule-based adapter answers the decomposed prompts by replaying the
heuristic labelling pipeline, so the full inference loop and
post-processing run without any neural model.  The exec adapter speaks a
line-delimited JSON protocol with an external process, letting a real
fine-tuned model plug in without linking an ML runtime.
"""

from __future__ import annotations

import json
import re
import shlex
import subprocess
from dataclasses import dataclass
from typing import Protocol

from .datagen import (
    PromptTemplates,
    Providers,
    format_topic_list,
    format_verbatim_list,
    label_review,
    parse_topic_list,
    parse_verbatim_list,
)
from .errors import DataError
from .matching import MatchConfig
from .model import LabelledRecord, Review, Taxonomy
from .segmentation import SegmenterConfig
from .sentiment import SentimentConfig


class GenerativeModel(Protocol):
    def generate(self, prompt: str) -> str: ...


@dataclass(frozen=True)
class RawInsight:
    topic: str
    polarity: str
    verbatims: tuple[str, ...]

    def to_dict(self) -> dict:
        return {"topic": self.topic, "polarity": self.polarity, "verbatims": list(self.verbatims)}

    @classmethod
    def from_dict(cls, d: dict) -> "RawInsight":
        return cls(topic=d["topic"], polarity=d["polarity"], verbatims=tuple(d.get("verbatims", ())))


@dataclass(frozen=True)
class RawBundle:
    """Unvalidated inference output for one review; post-processing decides fates."""

    review_id: str
    items: tuple[RawInsight, ...]
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "review_id": self.review_id,
            "items": [i.to_dict() for i in self.items],
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RawBundle":
        return cls(
            review_id=d["review_id"],
            items=tuple(RawInsight.from_dict(i) for i in d.get("items", ())),
            warnings=tuple(d.get("warnings", ())),
        )


def run_inference(
    review: Review, model: GenerativeModel, templates: PromptTemplates | None = None
) -> RawBundle:
    """The decomposed protocol: topics, then per-topic polarity, then verbatims.

    Issues 1 + N + |parsed pairs| generate calls.  Topics whose polarity or
    verbatim output cannot be parsed are dropped with a warning record.
    """
    tpl = templates or PromptTemplates()
    warnings: list[str] = []

    raw_topics = model.generate(tpl.topic_q.format(review=review.text))
    names, strict = parse_topic_list(raw_topics)
    if not strict:
        warnings.append(f"phase-1 output parsed leniently: {raw_topics!r}")

    pairs: list[tuple[str, str]] = []
    for name in names:
        raw_pol = model.generate(tpl.polarity_q.format(review=review.text, topic=name))
        pol = raw_pol.strip().lower()
        if pol not in ("positive", "negative"):
            warnings.append(f"dropped topic {name!r}: unparseable polarity {raw_pol!r}")
            continue
        pairs.append((name, pol))

    items: list[RawInsight] = []
    for name, pol in pairs:
        raw_verbatims = model.generate(
            tpl.verbatim_q.format(review=review.text, topic=name, polarity=pol)
        )
        verbatims = parse_verbatim_list(raw_verbatims)
        if not verbatims:
            warnings.append(f"dropped topic {name!r}: no verbatims in {raw_verbatims!r}")
            continue
        items.append(RawInsight(topic=name, polarity=pol, verbatims=tuple(verbatims)))

    return RawBundle(review_id=review.id, items=tuple(items), warnings=tuple(warnings))


def _template_regex(template: str, slots: tuple[str, ...]) -> re.Pattern:
    pattern = re.escape(template)
    for i, slot in enumerate(slots):
        group = f"(?P<{slot}>.*)" if i == len(slots) - 1 else f"(?P<{slot}>.*?)"
        pattern = pattern.replace(re.escape("{" + slot + "}"), group, 1)
    return re.compile("^" + pattern + "$", re.DOTALL)


class RuleBasedAdapter:
    """Answers each prompt by running the labelling pipeline on the review
    text embedded in it and formatting the requested phase's answer."""

    def __init__(
        self,
        taxonomy: Taxonomy,
        seg_cfg: SegmenterConfig,
        sent_cfg: SentimentConfig,
        match_cfg: MatchConfig,
        providers: Providers,
        templates: PromptTemplates | None = None,
    ):
        self._taxonomy = taxonomy
        self._seg_cfg = seg_cfg
        self._sent_cfg = sent_cfg
        self._match_cfg = match_cfg
        self._providers = providers
        tpl = templates or PromptTemplates()
        # most specific template first so shared prefixes cannot shadow it
        self._routes = (
            (_template_regex(tpl.verbatim_q, ("topic", "polarity", "review")), "verbatim"),
            (_template_regex(tpl.polarity_q, ("topic", "review")), "polarity"),
            (_template_regex(tpl.topic_q, ("review",)), "topic"),
        )
        self._records: dict[str, LabelledRecord] = {}

    def _record(self, review_text: str) -> LabelledRecord:
        record = self._records.get(review_text)
        if record is None:
            record = label_review(
                Review(id="adapter", text=review_text),
                self._taxonomy,
                self._seg_cfg,
                self._sent_cfg,
                self._match_cfg,
                self._providers,
            )
            self._records[review_text] = record
        return record

    def generate(self, prompt: str) -> str:
        for pattern, phase in self._routes:
            m = pattern.match(prompt)
            if m is None:
                continue
            record = self._record(m.group("review"))
            if phase == "topic":
                return format_topic_list([i.topic_name for i in record.insights])
            topic = m.group("topic").casefold()
            if phase == "polarity":
                for insight in record.insights:
                    if insight.topic_name.casefold() == topic:
                        return insight.polarity.value
                return ""
            polarity = m.group("polarity").casefold()
            for insight in record.insights:
                if insight.topic_name.casefold() == topic and insight.polarity.value == polarity:
                    return format_verbatim_list(insight.verbatims)
            return ""
        raise DataError(f"prompt does not match any known template: {prompt!r}")


def rule_based_adapter(
    taxonomy: Taxonomy,
    seg_cfg: SegmenterConfig,
    sent_cfg: SentimentConfig,
    match_cfg: MatchConfig,
    providers: Providers,
    templates: PromptTemplates | None = None,
) -> RuleBasedAdapter:
    return RuleBasedAdapter(taxonomy, seg_cfg, sent_cfg, match_cfg, providers, templates)


class CountingModel:
    """Wrapper counting generate calls; used to audit prompt accounting."""

    def __init__(self, inner: GenerativeModel):
        self.inner = inner
        self.calls = 0

    def generate(self, prompt: str) -> str:
        self.calls += 1
        return self.inner.generate(prompt)


class ExecAdapter:
    """Drives an external process over stdin/stdout.

    One JSON object {"prompt": ...} per request line; the process must
    answer with one {"text": ...} line per request.
    """

    def __init__(self, command: str):
        self._command = command
        try:
            self._proc = subprocess.Popen(
                shlex.split(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise DataError(f"could not start adapter process {command!r}: {exc}") from exc

    def generate(self, prompt: str) -> str:
        proc = self._proc
        if proc.poll() is not None:
            raise DataError(f"adapter process {self._command!r} exited early")
        assert proc.stdin is not None and proc.stdout is not None
        proc.stdin.write(json.dumps({"prompt": prompt}) + "\n")
        proc.stdin.flush()
        line = proc.stdout.readline()
        if not line:
            raise DataError(f"adapter process {self._command!r} closed its output")
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"adapter process sent invalid JSON: {line!r}") from exc
        if "text" not in reply:
            raise DataError(f"adapter reply missing 'text' field: {line!r}")
        return str(reply["text"])

    def close(self) -> None:
        if self._proc.poll() is None:
            if self._proc.stdin is not None:
                self._proc.stdin.close()
            self._proc.terminate()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()

    def __enter__(self) -> "ExecAdapter":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
