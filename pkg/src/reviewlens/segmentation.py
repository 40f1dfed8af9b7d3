"""Splits reviews into candidate phrases using language-syntax heuristics.

Two passes: sentence boundaries at '.', '!', '?' and the standalone word
"but"; phrase boundaries at ',', ';', '&' and standalone "and".  A phrase
split is applied only when every resulting piece is longer than
min_phrase_words words, so short coordinations like "nice, soft" survive
whole.  Word delimiters match case-insensitively as whole words ("butter"
never splits).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache

from .errors import ConfigError
from .model import Review, Segment

Span = tuple[int, int]


@dataclass(frozen=True)
class SegmenterConfig:
    sentence_delimiters: tuple[str, ...] = (".", "!", "?", "but")
    phrase_delimiters: tuple[str, ...] = (",", ";", "&", "and")
    min_phrase_words: int = 2

    def __post_init__(self):
        object.__setattr__(self, "sentence_delimiters", tuple(self.sentence_delimiters))
        object.__setattr__(self, "phrase_delimiters", tuple(self.phrase_delimiters))
        if self.min_phrase_words < 1:
            raise ConfigError(
                f"segmenter.min_phrase_words must be >= 1, got {self.min_phrase_words}"
            )
        if not self.sentence_delimiters or not self.phrase_delimiters:
            raise ConfigError("segmenter delimiter sets must be non-empty")


@lru_cache(maxsize=32)
def _delimiter_pattern(delimiters: tuple[str, ...]) -> re.Pattern:
    chars = [d for d in delimiters if len(d) == 1 and not d.isalnum()]
    words = [d for d in delimiters if d not in chars]
    parts = []
    if chars:
        parts.append("[" + re.escape("".join(chars)) + "]")
    for w in words:
        # whole word bounded by non-word characters; "butter" must not split
        parts.append(r"(?<!\w)" + re.escape(w) + r"(?!\w)")
    return re.compile("|".join(parts), re.IGNORECASE)


def _trim(text: str, start: int, end: int) -> Span:
    while start < end and text[start].isspace():
        start += 1
    while end > start and text[end - 1].isspace():
        end -= 1
    return start, end


def _pieces(text: str, pattern: re.Pattern) -> list[tuple[str, Span]]:
    """Non-empty trimmed pieces between delimiter matches, with char spans."""
    out: list[tuple[str, Span]] = []
    prev = 0
    for m in pattern.finditer(text):
        start, end = _trim(text, prev, m.start())
        if end > start:
            out.append((text[start:end], (start, end)))
        prev = m.end()
    start, end = _trim(text, prev, len(text))
    if end > start:
        out.append((text[start:end], (start, end)))
    return out


def _byte_span(text: str, span: Span) -> Span:
    start, end = span
    b_start = len(text[:start].encode("utf-8"))
    return b_start, b_start + len(text[start:end].encode("utf-8"))


def split_sentences(text: str, cfg: SegmenterConfig | None = None) -> list[tuple[str, Span]]:
    """Sentence pieces with byte spans into the original text."""
    cfg = cfg or SegmenterConfig()
    pattern = _delimiter_pattern(cfg.sentence_delimiters)
    return [(piece, _byte_span(text, span)) for piece, span in _pieces(text, pattern)]


def _phrase_pieces(sentence: str, cfg: SegmenterConfig) -> list[tuple[str, Span]]:
    pattern = _delimiter_pattern(cfg.phrase_delimiters)
    candidates = _pieces(sentence, pattern)
    if len(candidates) <= 1 and candidates and candidates[0][0] == sentence:
        return candidates
    # the guard: a split leaving any piece at or below the word floor is
    # rejected and the sentence is kept whole, delimiters included
    if any(len(piece.split()) <= cfg.min_phrase_words for piece, _ in candidates):
        return [(sentence, (0, len(sentence)))]
    return candidates


def split_phrases(sentence: str, cfg: SegmenterConfig | None = None) -> list[str]:
    cfg = cfg or SegmenterConfig()
    return [piece for piece, _ in _phrase_pieces(sentence, cfg)]


def segment_review(review: Review, cfg: SegmenterConfig | None = None) -> list[Segment]:
    """Sentence then phrase splitting, in source order, polarity unset."""
    cfg = cfg or SegmenterConfig()
    text = review.text
    sentence_pattern = _delimiter_pattern(cfg.sentence_delimiters)
    segments: list[Segment] = []
    for sent_text, (s_start, _) in _pieces(text, sentence_pattern):
        for phrase, (p_start, p_end) in _phrase_pieces(sent_text, cfg):
            span = (s_start + p_start, s_start + p_end)
            segments.append(
                Segment(review_id=review.id, text=phrase, char_span=_byte_span(text, span))
            )
    return segments
