"""Per-segment sentiment scoring behind a pluggable two-head classifier contract.

A classifier returns independent positive/negative scores (p, n) in [0, 1];
they need not sum to 1.  A segment is neutral when both stay below the
threshold delta_p, otherwise the stronger head wins.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Protocol

from . import jsonl
from .errors import ConfigError, DataError
from .model import Polarity, Segment

NEGATORS = frozenset({"not", "no", "never"})

_TOKEN_RE = re.compile(r"[\w']+")


@dataclass(frozen=True)
class SentimentConfig:
    delta_p: float = 0.7

    def __post_init__(self):
        if not 0 < self.delta_p <= 1:
            raise ConfigError(f"sentiment.delta_p must be in (0, 1], got {self.delta_p}")


class SentimentClassifier(Protocol):
    def score(self, text: str) -> tuple[float, float]: ...


def classify_segment(
    segment: Segment, classifier: SentimentClassifier, cfg: SentimentConfig | None = None
) -> Segment:
    """Returns the segment with polarity and both head scores filled in."""
    cfg = cfg or SentimentConfig()
    if not segment.text.strip():
        raise ValueError("cannot classify an empty segment")
    try:
        p, n = classifier.score(segment.text)
    except DataError:
        raise
    except Exception as exc:
        raise DataError(
            f"sentiment classifier failed on segment {segment.review_id}@{segment.char_span}: {exc}"
        ) from exc
    if not (0 <= p <= 1 and 0 <= n <= 1):
        raise DataError(
            f"classifier scores out of range for segment {segment.review_id}@{segment.char_span}: "
            f"p={p}, n={n}"
        )
    if p < cfg.delta_p and n < cfg.delta_p:
        polarity = Polarity.NEUTRAL
    elif p > n:
        polarity = Polarity.POSITIVE
    else:
        # ties resolve to negative: surfacing issues is the pipeline's job
        polarity = Polarity.NEGATIVE
    return replace(segment, polarity=polarity, pos_score=float(p), neg_score=float(n))


def squash(x: float) -> float:
    return 1.0 - math.exp(-x)


class LexiconClassifier:
    """Token-weight classifier, a desk-scale stand-in for a trained model.

    Positive and negative evidence accumulate separately and are squashed
    into [0, 1) with 1 - exp(-sum).  The negators "not"/"no"/"never" invert
    the next sentiment-bearing token.  Note that a single token needs
    weight above ~1.2 to clear the default 0.7 threshold.
    """

    def __init__(self, weights: Mapping[str, float]):
        self._weights = {k.lower(): float(v) for k, v in weights.items()}
        for token, w in self._weights.items():
            if not math.isfinite(w):
                raise DataError(f"lexicon weight for {token!r} is not finite")

    def score(self, text: str) -> tuple[float, float]:
        pos = 0.0
        neg = 0.0
        flip = False
        for token in _TOKEN_RE.findall(text.lower()):
            if token in NEGATORS:
                flip = not flip
                continue
            w = self._weights.get(token)
            if w is None:
                continue
            if flip:
                w = -w
                flip = False
            if w > 0:
                pos += w
            else:
                neg += -w
        return squash(pos), squash(neg)


def lexicon_classifier(path: str | Path) -> LexiconClassifier:
    """Load a JSONL lexicon ({"token": ..., "weight": ...})."""
    weights: dict[str, float] = {}
    for row_no, row in enumerate(jsonl.read_jsonl(path), start=1):
        if "token" not in row or "weight" not in row:
            raise DataError(f"{path}:{row_no}: lexicon rows need 'token' and 'weight' fields")
        weights[str(row["token"])] = float(row["weight"])
    return LexiconClassifier(weights)


class PrecomputedSentiment:
    """Replays externally computed (p, n) scores from a JSONL table."""

    def __init__(self, table: Mapping[str, tuple[float, float]]):
        self._table = dict(table)

    def score(self, text: str) -> tuple[float, float]:
        key = text.strip()
        if key not in self._table:
            raise DataError(f"no precomputed sentiment scores for text: {text!r}")
        return self._table[key]


def precomputed_sentiment(path: str | Path) -> PrecomputedSentiment:
    table: dict[str, tuple[float, float]] = {}
    for row_no, row in enumerate(jsonl.read_jsonl(path), start=1):
        if "text" not in row or "p" not in row or "n" not in row:
            raise DataError(f"{path}:{row_no}: score rows need 'text', 'p' and 'n' fields")
        table[str(row["text"]).strip()] = (float(row["p"]), float(row["n"]))
    return PrecomputedSentiment(table)
