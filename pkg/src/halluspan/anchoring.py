"""Locate phrases returned by an LLM inside the text they annotate."""

from __future__ import annotations

import enum
import logging
import unicodedata
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .model import CharSpan
from .spans import ResponseIntervals

logger = logging.getLogger(__name__)

_QUOTE_PAIRS = {
    '"': '"',
    "'": "'",
    "`": "`",
    "“": "”",
    "‘": "’",
    "«": "»",
    "「": "」",
    "『": "』",
}


class MatchMode(str, enum.Enum):
    EXACT = "exact"
    NORMALIZED = "normalized"
    CASEFOLD = "casefold"
    NOT_FOUND = "not_found"


@dataclass(frozen=True)
class AnchorResult:
    phrase: str
    span: CharSpan | None
    matched_via: MatchMode

    @property
    def found(self) -> bool:
        return self.span is not None


def clean_phrase(phrase: str) -> str:
    """Strip surrounding whitespace and enclosing quote pairs."""
    phrase = phrase.strip()
    while len(phrase) >= 2 and _QUOTE_PAIRS.get(phrase[0]) == phrase[-1]:
        phrase = phrase[1:-1].strip()
    return phrase


def _nfc(s: str) -> str:
    return unicodedata.normalize("NFC", s)


def _nfc_casefold(s: str) -> str:
    return unicodedata.normalize("NFC", _nfc(s).casefold())


def _segments(text: str) -> list[tuple[int, int]]:
    """Split text into base character + trailing combining marks."""
    bounds = []
    start = 0
    for i in range(1, len(text) + 1):
        if i == len(text) or unicodedata.combining(text[i]) == 0:
            bounds.append((start, i))
            start = i
    return bounds


def _find_transformed(
    text: str, phrase: str, cursor: int, transform: Callable[[str], str]
) -> CharSpan | None:
    """Search ``transform(phrase)`` in a segment-wise transformed copy of ``text``.

    Matches must begin and end on segment boundaries so they map back to
    whole characters of the original text.
    """
    needle = transform(phrase)
    if not needle:
        return None
    pieces = []
    starts: dict[int, int] = {}  # transformed offset -> original offset
    ends: dict[int, int] = {}
    pos = 0
    first_after_cursor = None
    for lo, hi in _segments(text):
        starts[pos] = lo
        if first_after_cursor is None and lo >= cursor:
            first_after_cursor = pos
        chunk = transform(text[lo:hi])
        pieces.append(chunk)
        pos += len(chunk)
        ends[pos] = hi
    if first_after_cursor is None:
        return None
    haystack = "".join(pieces)
    at = haystack.find(needle, first_after_cursor)
    while at != -1:
        stop = at + len(needle)
        if at in starts and stop in ends:
            return CharSpan(starts[at], ends[stop])
        at = haystack.find(needle, at + 1)
    return None


def anchor_phrase(text: str, phrase: str, cursor: int = 0) -> AnchorResult:
    """Find the leftmost occurrence of ``phrase`` starting at or after ``cursor``.

    Tries an exact match first, then NFC-normalized, then case-folded.

    >>> anchor_phrase("Paris is the capital of Germany", "Germany").span
    CharSpan(start=24, end=31)
    """
    cleaned = clean_phrase(phrase)
    if not cleaned:
        raise ValueError("cannot anchor an empty phrase")

    at = text.find(cleaned, cursor)
    if at != -1:
        return AnchorResult(phrase, CharSpan(at, at + len(cleaned)), MatchMode.EXACT)
    span = _find_transformed(text, cleaned, cursor, _nfc)
    if span is not None:
        return AnchorResult(phrase, span, MatchMode.NORMALIZED)
    span = _find_transformed(text, cleaned, cursor, _nfc_casefold)
    if span is not None:
        return AnchorResult(phrase, span, MatchMode.CASEFOLD)
    return AnchorResult(phrase, None, MatchMode.NOT_FOUND)


def _overlaps_any(span: CharSpan, used: Sequence[CharSpan]) -> bool:
    return any(span.start < u.end and u.start < span.end for u in used)


def _anchor_from_start(text: str, phrase: str, used: Sequence[CharSpan]) -> AnchorResult:
    # Second pass: leftmost occurrence not already consumed, else leftmost.
    first = anchor_phrase(text, phrase, 0)
    result = first
    while result.span is not None and _overlaps_any(result.span, used):
        result = anchor_phrase(text, phrase, result.span.start + 1)
    return result if result.span is not None else first


def anchor_all(
    text: str,
    phrases: Iterable[tuple[str, float | None]],
    warnings: list[str] | None = None,
) -> ResponseIntervals:
    """Anchor a response's phrases left to right and build its intervals.

    A moving cursor follows the last match so repeated words map to
    successive occurrences; a phrase not found ahead of the cursor is
    searched again from the start of the text.  Phrases that cannot be found
    are dropped with a warning.
    """

    def warn(msg: str) -> None:
        logger.warning(msg)
        if warnings is not None:
            warnings.append(msg)

    cursor = 0
    used: list[CharSpan] = []
    items: list[tuple[CharSpan, float | None]] = []
    for phrase, prob in phrases:
        if not clean_phrase(phrase):
            warn(f"skipping empty phrase {phrase!r}")
            continue
        result = anchor_phrase(text, phrase, cursor)
        if result.span is None and cursor > 0:
            result = _anchor_from_start(text, phrase, used)
        if result.span is None:
            warn(f"phrase {phrase!r} not found in output text; dropped")
            continue
        used.append(result.span)
        items.append((result.span, prob))
        cursor = result.span.end
    return ResponseIntervals.from_items(items)
