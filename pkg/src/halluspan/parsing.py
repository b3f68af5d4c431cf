"""Parsers for the three kinds of LLM answers the pipelines request.

* pipe lists (``Paris|1889``) for the plain detection prompt and keyword prompt,
* JSON word/probability lists for the scored detection and checker prompts,
* JSON claim-triplet lists for claim extraction.

LLMs wrap answers in code fences and chatty prose; the parsers look past
both. Only :func:`parse_prob_json` and :func:`parse_triplets` can fail, and
only when no JSON array is present at all.
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, field
from typing import Any, Iterator

from .anchoring import clean_phrase
from .model import ClaimTriplet

logger = logging.getLogger(__name__)

PHRASE_KEYS = ("word", "text", "phrase")
PROB_KEYS = ("probability", "prob", "score")

_NONE_ANSWERS = {
    "none",
    "no",
    "n/a",
    "na",
    "nil",
    "null",
    "nothing",
    "empty",
    "no hallucination",
    "no hallucinations",
    "no hallucination tokens",
    "no hallucinated tokens",
    "there are no hallucinations",
    "there are no hallucination tokens",
    "no unsupported tokens",
    "all tokens are supported",
}
_LABEL_PREFIX = re.compile(r"^\s*[A-Za-z][A-Za-z ]{0,40}:\s+(?=\S)")
_BULLET = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s+")


class ParseError(ValueError):
    pass


@dataclass(frozen=True)
class ParsedDetection:
    items: tuple[tuple[str, float | None], ...] = ()
    warnings: tuple[str, ...] = field(default=(), compare=False)

    @property
    def phrases(self) -> list[str]:
        return [p for p, _ in self.items]


def _content_lines(raw: str) -> list[str]:
    return [
        line.strip()
        for line in raw.splitlines()
        if line.strip() and not line.strip().startswith("```")
    ]


def _is_none_answer(line: str) -> bool:
    return line.strip(" .!`'\"*").casefold() in _NONE_ANSWERS


def _split_pipes(line: str) -> list[str]:
    line = _BULLET.sub("", line).strip("`").strip()
    prefix = _LABEL_PREFIX.match(line)
    if prefix and "|" not in prefix.group(0):
        line = line[prefix.end():]
    entries = (clean_phrase(part) for part in line.split("|"))
    return [e for e in entries if e and not _is_none_answer(e)]


def _iter_json_arrays(raw: str) -> Iterator[list[Any]]:
    decoder = json.JSONDecoder()
    for match in re.finditer(r"\[", raw):
        try:
            value, _ = decoder.raw_decode(raw, match.start())
        except ValueError:
            continue
        if isinstance(value, list):
            yield value


def _first_json_array(raw: str) -> list[Any] | None:
    return next(_iter_json_arrays(raw), None)


def parse_pipe_list(raw: str) -> ParsedDetection:
    """Parse a ``'|'``-separated token list.

    The first line containing ``'|'`` is the answer; a leading label such as
    ``Answer:`` and wrapping backticks are dropped.  Without any pipe, a JSON
    array of strings, a bullet list, or a single short line is accepted as the
    answer, while refusals such as ``None`` and sentence-like prose yield an
    empty result.

    >>> parse_pipe_list("Paris|1889").phrases
    ['Paris', '1889']
    """
    lines = _content_lines(raw)
    for line in lines:
        if "|" in line:
            return ParsedDetection(tuple((p, None) for p in _split_pipes(line)))

    array = _first_json_array(raw)
    if array is not None:
        raw_items = [x if isinstance(x, str) else _entry_phrase_prob(x)[0] for x in array]
        strings = [clean_phrase(x) for x in raw_items if x]
        return ParsedDetection(tuple((s, None) for s in strings if s))

    if not lines:
        return ParsedDetection()
    if len(lines) > 1 and all(_BULLET.match(line) for line in lines):
        entries = [clean_phrase(_BULLET.sub("", line)) for line in lines]
        return ParsedDetection(tuple((e, None) for e in entries if e and not _is_none_answer(e)))
    candidates = [line for line in lines if not line.endswith(":")]
    if len(candidates) == 1:
        line = candidates[0]
        words = line.split()
        prose = line[-1] in ".!?。" and len(words) > 3
        if not prose and len(words) <= 6 and not _is_none_answer(line):
            entries = _split_pipes(line)
            return ParsedDetection(tuple((e, None) for e in entries))
    return ParsedDetection()


def _number(value: Any) -> float | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        number = float(value)
    elif isinstance(value, str):
        try:
            number = float(value.strip().rstrip("%")) / (100.0 if value.strip().endswith("%") else 1.0)
        except ValueError:
            return None
    else:
        return None
    return None if math.isnan(number) else number


def _entry_phrase_prob(entry: Any) -> tuple[str | None, float | None]:
    if isinstance(entry, dict):
        phrase = next((entry[k] for k in PHRASE_KEYS if isinstance(entry.get(k), str)), None)
        prob = next((_number(entry[k]) for k in PROB_KEYS if k in entry), None)
        return phrase, prob
    if isinstance(entry, list) and len(entry) == 2 and isinstance(entry[0], str):
        return entry[0], _number(entry[1])
    return None, None


def parse_prob_json(raw: str) -> ParsedDetection:
    """Parse the first JSON array of ``{word, probability}`` objects in ``raw``.

    Accepted phrase keys are ``word``, ``text`` and ``phrase``; probability
    keys are ``probability``, ``prob`` and ``score``.  Probabilities above 1
    are clamped to 1; negative ones and malformed entries are skipped with a
    warning.

    Raises:
        ParseError: if ``raw`` contains no JSON array.
    """
    array = _first_json_array(raw)
    if array is None:
        raise ParseError("no JSON array found in response")
    items: list[tuple[str, float | None]] = []
    warnings: list[str] = []
    for i, entry in enumerate(array):
        phrase, prob = _entry_phrase_prob(entry)
        phrase = clean_phrase(phrase) if phrase is not None else None
        if not phrase or prob is None:
            warnings.append(f"entry {i}: skipped malformed item {entry!r}")
            continue
        if prob < 0.0:
            warnings.append(f"entry {i}: skipped negative probability {prob}")
            continue
        items.append((phrase, min(prob, 1.0)))
    for msg in warnings:
        logger.warning(msg)
    return ParsedDetection(tuple(items), tuple(warnings))


def parse_triplets(raw: str) -> tuple[list[ClaimTriplet], list[str]]:
    """Parse a JSON array of ``{subject, predicate, object}`` claims.

    Entries may also be three-element string lists.  Malformed entries are
    skipped and reported in the returned warnings.

    Raises:
        ParseError: if ``raw`` contains no JSON array.
    """
    array = _first_json_array(raw)
    if array is None:
        raise ParseError("no JSON array found in claim extraction response")
    claims: list[ClaimTriplet] = []
    warnings: list[str] = []
    for i, entry in enumerate(array):
        try:
            if isinstance(entry, dict):
                fields = [entry.get("subject"), entry.get("predicate"), entry.get("object")]
            elif isinstance(entry, list) and len(entry) == 3:
                fields = list(entry)
            else:
                raise ValueError("not a triplet")
            if not all(isinstance(f, str) for f in fields):
                raise ValueError("triplet fields must be strings")
            claims.append(ClaimTriplet(*(f.strip() for f in fields)))
        except ValueError as exc:
            warnings.append(f"claim {i}: skipped ({exc}): {entry!r}")
    for msg in warnings:
        logger.warning(msg)
    return claims, warnings
